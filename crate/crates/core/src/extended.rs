use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative boundary level or the `+inf` sentinel.
///
/// Boundaries such as `b_-` may be identically infinite. The sentinel never
/// takes part in arithmetic; every comparison against it goes through the
/// methods below. Serialized as a JSON number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    /// `self > x` with the sentinel above every real.
    pub fn exceeds(self, x: f64) -> bool {
        match self {
            Extended::Finite(v) => v > x,
            Extended::Infinite => true,
        }
    }

    /// `x >= self`, i.e. a point at `x` has reached the level.
    pub fn reached_by(self, x: f64) -> bool {
        !self.exceeds(x)
    }

    pub fn max(self, other: Extended) -> Extended {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Extended) -> Extended {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Format for CSV cells: the number or `inf`.
    pub fn to_cell(self, precision: usize) -> String {
        match self {
            Extended::Finite(v) => format!("{v:.precision$}"),
            Extended::Infinite => "inf".to_string(),
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        Extended::Finite(v)
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.partial_cmp(b),
            (Extended::Finite(_), Extended::Infinite) => Some(Ordering::Less),
            (Extended::Infinite, Extended::Finite(_)) => Some(Ordering::Greater),
            (Extended::Infinite, Extended::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => serializer.serialize_f64(*v),
            Extended::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ExtendedVisitor;

        impl Visitor<'_> for ExtendedVisitor {
            type Value = Extended;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Extended, E> {
                if v == "inf" {
                    Ok(Extended::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(ExtendedVisitor)
    }
}
