//! ±1 spin vectors.

use crate::error::{Error, Result};

/// A classical Ising spin, always `-1` or `+1`.
pub type Spin = i8;

pub fn check_spins(values: &[Spin]) -> Result<()> {
    match values.iter().position(|&s| s != 1 && s != -1) {
        Some(i) => Err(Error::input(format!(
            "entry {i} is {}, expected -1 or +1",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Spin of variable `i` in the enumeration state `state` (bit set means +1).
#[inline]
pub fn spin_of(state: u64, i: usize) -> Spin {
    if (state >> i) & 1 == 1 {
        1
    } else {
        -1
    }
}

pub fn parse_spin(tok: &str) -> Option<Spin> {
    match tok {
        "1" | "+1" => Some(1),
        "-1" => Some(-1),
        _ => None,
    }
}

pub fn format_spins(values: &[Spin]) -> String {
    let mut out = String::with_capacity(values.len() * 3);
    for (i, s) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(if *s > 0 { "1" } else { "-1" });
    }
    out
}
