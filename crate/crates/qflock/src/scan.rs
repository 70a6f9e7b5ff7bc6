//! Locating the flock/disorder transition in a Binder-cumulant scan.

/// Default offset below the ordered value `2/3`.
pub const DEFAULT_EPSILON: f64 = 0.02;

/// One scan point: `U` averaged over the time window, with its error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub h: f64,
    pub binder: f64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransitionEstimate {
    /// First crossing below the threshold, linearly interpolated.
    Crossing { h: f64, error: f64 },
    /// No crossing within the scan: `h* > h_max`.
    Censored { h_max: f64 },
    /// Already below the threshold at the first scan point: `h* <= h_min`.
    BelowRange { h_min: f64 },
}

pub fn threshold(epsilon: f64) -> f64 {
    2.0 / 3.0 - epsilon
}

/// Field `h*` where `U` first drops below `2/3 - epsilon`. Points must be
/// sorted by `h`. The error adds half the bracketing grid spacing and the
/// propagated `U` errors in quadrature.
pub fn estimate_transition(points: &[ScanPoint], epsilon: f64) -> Option<TransitionEstimate> {
    let first = points.first()?;
    let thr = threshold(epsilon);
    if first.binder < thr {
        return Some(TransitionEstimate::BelowRange { h_min: first.h });
    }
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.binder < thr {
            let span = b.h - a.h;
            let drop = a.binder - b.binder;
            let lambda = (a.binder - thr) / drop;
            let h = a.h + lambda * span;
            let slope = drop / span;
            let du = ((1.0 - lambda) * a.error).hypot(lambda * b.error);
            let error = (0.5 * span).hypot(du / slope);
            return Some(TransitionEstimate::Crossing { h, error });
        }
    }
    Some(TransitionEstimate::Censored {
        h_max: points.last().unwrap().h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(hs: &[f64], f: impl Fn(f64) -> f64) -> Vec<ScanPoint> {
        hs.iter()
            .map(|&h| ScanPoint {
                h,
                binder: f(h),
                error: 0.0,
            })
            .collect()
    }

    #[test]
    fn flat_scan_is_censored() {
        let pts = line(&[0.1, 0.2, 0.3], |_| 2.0 / 3.0);
        assert_eq!(
            estimate_transition(&pts, DEFAULT_EPSILON),
            Some(TransitionEstimate::Censored { h_max: 0.3 })
        );
    }

    #[test]
    fn linear_scan_inverts_exactly() {
        let hs: Vec<f64> = (1..=10).map(|k| k as f64 * 0.1).collect();
        let pts = line(&hs, |h| 2.0 / 3.0 - 0.04 * h);
        match estimate_transition(&pts, DEFAULT_EPSILON).unwrap() {
            TransitionEstimate::Crossing { h, error } => {
                assert!((h - 0.5).abs() < 1e-12, "{h}");
                assert!((error - 0.05).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn below_range_and_empty() {
        let pts = line(&[1.0, 2.0], |_| 0.1);
        assert_eq!(
            estimate_transition(&pts, DEFAULT_EPSILON),
            Some(TransitionEstimate::BelowRange { h_min: 1.0 })
        );
        assert_eq!(estimate_transition(&[], DEFAULT_EPSILON), None);
    }

    #[test]
    fn error_bars_widen_the_estimate() {
        let mut pts = line(&[0.0, 1.0], |h| 0.7 - 0.2 * h);
        let TransitionEstimate::Crossing { error: e0, .. } = estimate_transition(&pts, 0.02).unwrap() else {
            panic!()
        };
        pts[1].error = 0.05;
        let TransitionEstimate::Crossing { error: e1, .. } = estimate_transition(&pts, 0.02).unwrap() else {
            panic!()
        };
        assert!(e1 > e0);
    }

    proptest! {
        #[test]
        fn crossing_lies_in_its_bracket(values in proptest::collection::vec(0.0f64..0.7, 2..12)) {
            let pts: Vec<ScanPoint> = values
                .iter()
                .enumerate()
                .map(|(k, &u)| ScanPoint { h: k as f64, binder: u, error: 0.01 })
                .collect();
            if let Some(TransitionEstimate::Crossing { h, .. }) = estimate_transition(&pts, 0.02) {
                let k = h.floor() as usize + 1;
                prop_assert!(pts[k].binder < threshold(0.02));
                prop_assert!(pts[..k].iter().all(|p| p.binder >= threshold(0.02)));
            }
        }
    }
}
