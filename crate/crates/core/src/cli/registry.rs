use std::path::Path;

use crate::constellation::{Constellation, SpiralParams, DEFAULT_POWER};
use crate::error::{Error, Result};
use crate::optimize::apsk_realize;

/// Builtin constellation names, in the form accepted by [`builtin_constellation`].
pub const BUILTIN_NAMES: [&str; 5] = ["psk", "qam", "spiral-qam", "apsk:<n1,n2,...>", "file:<path>"];

/// Resolves a constellation by name at the canonical power.
///
/// `spiral-qam` uses [`SpiralParams::default`]; see
/// [`builtin_constellation_with`] to override the shape.
pub fn builtin_constellation(name: &str, m: usize) -> Result<Constellation> {
    builtin_constellation_with(name, m, SpiralParams::default())
}

pub fn builtin_constellation_with(name: &str, m: usize, spiral: SpiralParams) -> Result<Constellation> {
    let name = name.trim();
    if let Some(path) = name.strip_prefix("file:") {
        let c = Constellation::read_from(Path::new(path))?;
        if c.len() != m {
            return Err(Error::InvalidParameter(format!(
                "`{path}` holds {} points but m = {m}",
                c.len()
            )));
        }
        return c.normalize_power();
    }
    if let Some(spec) = name.strip_prefix("apsk:") {
        let rings = parse_composition(spec)?;
        let total: usize = rings.iter().sum();
        if total != m {
            return Err(Error::InvalidParameter(format!(
                "composition `{spec}` has {total} points but m = {m}"
            )));
        }
        return Ok(apsk_realize(&rings, DEFAULT_POWER)?.1);
    }
    match name {
        "psk" => Constellation::psk(m, DEFAULT_POWER),
        "qam" => Constellation::qam(m, DEFAULT_POWER),
        "spiral-qam" | "spiral" => Constellation::spiral(m, spiral, DEFAULT_POWER),
        _ => Err(Error::Parse(format!(
            "unknown constellation `{name}` (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Ring sizes from `4,4,4,4` or `1-5-5-5`.
pub fn parse_composition(spec: &str) -> Result<Vec<usize>> {
    let rings = spec
        .split([',', '-'])
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad ring size `{s}` in `{spec}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if rings.is_empty() || rings.contains(&0) {
        return Err(Error::Parse(format!("composition `{spec}` needs positive ring sizes")));
    }
    Ok(rings)
}

/// Parses a value list: comma-separated values and `start:step:stop` ranges
/// (stop inclusive), freely mixed, e.g. `-2:2:6,10`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [v] => out.push(number(v, spec)?),
            [start, step, stop] => {
                let (start, step, stop) = (number(start, spec)?, number(step, spec)?, number(stop, spec)?);
                if step == 0.0 || (stop - start) * step < 0.0 {
                    return Err(Error::Parse(format!("range `{part}` does not reach its stop")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if n > 100_000 {
                    return Err(Error::Parse(format!("range `{part}` has {n} points")));
                }
                out.extend((0..n).map(|k| start + k as f64 * step));
            }
            _ => {
                return Err(Error::Parse(format!(
                    "bad grid `{part}` (expected v or start:step:stop)"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("empty grid `{spec}`")));
    }
    Ok(out)
}

fn number(s: &str, spec: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("bad number `{s}` in `{spec}`")))
}
