//! Recurrence classification of the level process from the four model scalars.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::QueueModel;

/// Relative tolerance under which two arrival rates count as equal.
pub const RATE_EQUALITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RecurrenceTag {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceClass {
    pub tag: RecurrenceTag,
    /// Which result decides the case, e.g. `"Theorem 1"`.
    pub rationale: String,
    /// The condition on the rates that selected the case.
    pub detail: String,
}

impl RecurrenceClass {
    pub fn is_positive_recurrent(&self) -> bool {
        self.tag == RecurrenceTag::PositiveRecurrent
    }
}

impl fmt::Display for RecurrenceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecurrenceTag::PositiveRecurrent => "PositiveRecurrent",
            RecurrenceTag::NullRecurrent => "NullRecurrent",
            RecurrenceTag::Transient => "Transient",
        })
    }
}

impl fmt::Display for RecurrenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.tag, self.rationale)
    }
}

fn rates_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= RATE_EQUALITY_TOL * a.abs().max(b.abs())
}

pub fn classify(lambda1: f64, lambda2: f64, theta1: f64, theta2: f64) -> Result<RecurrenceClass> {
    for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    use RecurrenceTag::*;
    let class = |tag, rationale: &str, detail: &str| RecurrenceClass {
        tag,
        rationale: rationale.to_string(),
        detail: detail.to_string(),
    };
    let equal = rates_equal(lambda1, lambda2);
    Ok(match (theta1 > 0.0, theta2 > 0.0) {
        (true, true) => class(PositiveRecurrent, "Theorem 1", "theta1 > 0 and theta2 > 0"),
        (false, false) if equal => class(
            NullRecurrent,
            "Corollary 1",
            "theta1 = theta2 = 0 and lambda1 = lambda2",
        ),
        (false, false) => class(
            Transient,
            "Corollary 1",
            "theta1 = theta2 = 0 and lambda1 != lambda2",
        ),
        (true, false) if equal => class(NullRecurrent, "Corollary 2", "theta2 = 0 and lambda1 = lambda2"),
        (true, false) if lambda1 > lambda2 => class(
            PositiveRecurrent,
            "Corollary 2",
            "theta2 = 0 and lambda1 > lambda2",
        ),
        (true, false) => class(Transient, "Corollary 2", "theta2 = 0 and lambda1 < lambda2"),
        (false, true) if equal => class(
            NullRecurrent,
            "Corollary 2, sides swapped",
            "theta1 = 0 and lambda1 = lambda2",
        ),
        (false, true) if lambda2 > lambda1 => class(
            PositiveRecurrent,
            "Corollary 2, sides swapped",
            "theta1 = 0 and lambda2 > lambda1",
        ),
        (false, true) => class(
            Transient,
            "Corollary 2, sides swapped",
            "theta1 = 0 and lambda2 < lambda1",
        ),
    })
}

/// [`classify`] applied to a model's arrival rates and abandonment rates.
pub fn classify_model(model: &QueueModel) -> Result<RecurrenceClass> {
    let (a, b) = model.summaries()?;
    classify(a.rate, b.rate, model.theta1, model.theta2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RecurrenceTag::*;

    fn tag(l1: f64, l2: f64, t1: f64, t2: f64) -> RecurrenceTag {
        classify(l1, l2, t1, t2).unwrap().tag
    }

    #[test]
    fn documented_cases() {
        assert_eq!(tag(5.0, 4.556, 0.25, 1.0), PositiveRecurrent);
        assert_eq!(tag(1.0, 1.0, 0.0, 0.0), NullRecurrent);
        assert_eq!(tag(1.0, 2.0, 0.5, 0.0), Transient);
        assert_eq!(tag(1.0, 1.0 + 1e-15, 0.0, 0.0), NullRecurrent);
        assert_eq!(
            classify(5.0, 4.556, 0.25, 1.0).unwrap().to_string(),
            "PositiveRecurrent (Theorem 1)"
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(classify(1.0, 1.0, -0.1, 0.0).is_err());
        assert!(classify(0.0, 1.0, 0.1, 0.1).is_err());
        assert!(classify(1.0, f64::NAN, 0.1, 0.1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn theta() -> impl Strategy<Value = f64> {
            prop_oneof![Just(0.0), 0.001f64..10.0]
        }

        proptest! {
            #[test]
            fn symmetric_under_swap(l1 in 0.1f64..10.0, l2 in 0.1f64..10.0,
                                    t1 in theta(), t2 in theta()) {
                prop_assert_eq!(tag(l1, l2, t1, t2), tag(l2, l1, t2, t1));
            }

            #[test]
            fn both_impatient_is_positive(l1 in 0.1f64..10.0, l2 in 0.1f64..10.0,
                                          t1 in 1e-6f64..10.0, t2 in 1e-6f64..10.0) {
                prop_assert_eq!(tag(l1, l2, t1, t2), PositiveRecurrent);
            }

            #[test]
            fn positive_implies_eventual_down_drift(l1 in 0.1f64..10.0, l2 in 0.1f64..10.0,
                                                    t1 in 1e-3f64..10.0, t2 in theta()) {
                if tag(l1, l2, t1, t2) == PositiveRecurrent {
                    let k = (1.0f64).max((l1 - l2) / t1).floor() + 1.0;
                    prop_assert!(l2 + k * t1 > l1);
                }
            }
        }
    }
}
