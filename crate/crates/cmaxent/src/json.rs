//! JSON emission with a fixed float format, plus serde adapters for the
//! fixed-size nalgebra types used throughout.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which
//! round-trips any finite f64 bit-for-bit and keeps emitted files stable
//! across runs.

use std::io;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::Result;

/// Compact formatter that pins the float representation; everything else
/// keeps the default behaviour.
struct SigDigits17;

impl Formatter for SigDigits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serialize `value` to a JSON string with 17-significant-digit floats.
pub fn to_string_17<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::with_capacity(256);
    let mut ser = Serializer::with_formatter(&mut out, SigDigits17);
    value.serialize(&mut ser)?;
    // The formatter only ever writes ASCII.
    Ok(String::from_utf8(out).expect("json output is utf-8"))
}

/// Serde adapter: `Vector2<f64>` as a two-element JSON array.
pub mod vec2 {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector2<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
        [v.x, v.y].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vector2<f64>, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(de)?;
        Ok(Vector2::new(x, y))
    }
}

/// Serde adapter: `Matrix2<f64>` as row-major nested JSON arrays.
pub mod mat2 {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix2<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
        [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Matrix2<f64>, D::Error> {
        let rows = <[[f64; 2]; 2]>::deserialize(de)?;
        Ok(Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
    }
}
