use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 1e-5;

/// An `(epsilon, delta)` privacy budget. `epsilon = +inf` is the non-private flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    #[serde(with = "crate::budget::inf_serde")]
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn non_private(delta: f64) -> Self {
        Self {
            epsilon: f64::INFINITY,
            delta,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_private(&self) -> bool {
        self.epsilon.is_finite()
    }
}

/// Parses `inf`, `infinity` or a positive decimal.
pub fn parse_epsilon(s: &str) -> Result<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("invalid epsilon `{s}`"))),
    }
}

pub fn format_epsilon(eps: f64) -> String {
    if eps.is_infinite() {
        "inf".to_string()
    } else {
        format!("{eps}")
    }
}

/// JSON has no infinity; `+inf` is written as the string `"inf"`.
pub(crate) mod inf_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(eps: &f64, s: S) -> Result<S::Ok, S::Error> {
        if eps.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*eps)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => super::parse_epsilon(&s).map_err(serde::de::Error::custom),
        }
    }

    /// Same encoding for an optional value; `None` is `null`.
    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(eps: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match eps {
                Some(e) => super::serialize(e, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            match Option::<super::Repr>::deserialize(d)? {
                None => Ok(None),
                Some(super::Repr::Num(x)) => Ok(Some(x)),
                Some(super::Repr::Str(s)) => super::super::parse_epsilon(&s)
                    .map(Some)
                    .map_err(serde::de::Error::custom),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(PrivacyBudget::new(0.0, 1e-5).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0).is_err());
        assert!(PrivacyBudget::new(f64::INFINITY, 1e-5).unwrap().epsilon().is_infinite());
        assert!(!PrivacyBudget::non_private(1e-5).is_private());
    }

    #[test]
    fn json_infinity() {
        let b = PrivacyBudget::non_private(1e-5);
        let s = serde_json::to_string(&b).unwrap();
        assert!(s.starts_with(r#"{"epsilon":"inf","delta":"#), "{s}");
        let back: PrivacyBudget = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }
}
