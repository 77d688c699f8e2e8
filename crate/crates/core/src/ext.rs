//! Extended reals for reports: +∞ round-trips through JSON as the string "inf".

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct ExtF64(pub f64);

impl ExtF64 {
    pub const INFINITY: ExtF64 = ExtF64(f64::INFINITY);

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<f64> for ExtF64 {
    fn from(v: f64) -> Self {
        ExtF64(v)
    }
}

impl fmt::Display for ExtF64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else {
            write!(f, "{}", fmt_g17(self.0))
        }
    }
}

/// Formats with 17 significant digits, the round-trip precision of f64.
pub fn fmt_g17(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    format!("{v:.16e}")
}

impl Serialize for ExtF64 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            v if v == f64::INFINITY => s.serialize_str("inf"),
            v if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            v if v.is_nan() => s.serialize_str("nan"),
            v => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for ExtF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ExtF64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtF64, E> {
                Ok(ExtF64(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtF64, E> {
                Ok(ExtF64(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtF64, E> {
                Ok(ExtF64(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtF64, E> {
                match v {
                    "inf" | "+inf" => Ok(ExtF64(f64::INFINITY)),
                    "-inf" => Ok(ExtF64(f64::NEG_INFINITY)),
                    "nan" => Ok(ExtF64(f64::NAN)),
                    other => Err(E::custom(format!("bad extended real `{other}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}
