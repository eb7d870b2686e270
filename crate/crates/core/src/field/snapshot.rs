//! Raw field snapshots.
//!
//! One plain-text header line `{dim: N, sizes: [n0, n1], n_components: C, time: t}`
//! followed by `C` row-major blocks of little-endian `f64` values.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::field::Shape;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub shape: Shape,
    pub time: f64,
    pub components: Vec<Vec<f64>>,
}

pub fn header_line(shape: Shape, n_components: usize, time: f64) -> String {
    let sizes: Vec<String> = shape.sizes().iter().map(|n| n.to_string()).collect();
    format!(
        "{{dim: {}, sizes: [{}], n_components: {}, time: {:?}}}",
        shape.dim(),
        sizes.join(", "),
        n_components,
        time
    )
}

pub fn write_snapshot<T: Real, W: Write>(
    mut w: W,
    shape: Shape,
    time: f64,
    components: &[&[T]],
) -> Result<()> {
    writeln!(w, "{}", header_line(shape, components.len(), time))?;
    let mut buf = Vec::with_capacity(components.len() * shape.len() * 8);
    for c in components {
        if c.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", shape.len()),
                found: format!("{} values", c.len()),
            });
        }
        for v in c.iter() {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn field<'a>(part: Option<&'a str>, key: &str) -> Result<&'a str> {
    let part = part.ok_or_else(|| Error::Snapshot(format!("missing `{key}` in header")))?;
    let (k, v) = part
        .split_once(':')
        .ok_or_else(|| Error::Snapshot(format!("malformed header entry `{part}`")))?;
    if k.trim() != key {
        return Err(Error::Snapshot(format!(
            "expected header key `{key}`, found `{}`",
            k.trim()
        )));
    }
    Ok(v.trim())
}

fn parse_header(line: &str) -> Result<(Shape, usize, f64)> {
    let inner = line
        .trim_end_matches(['\n', '\r'])
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| Error::Snapshot("header must be enclosed in braces".into()))?;
    // sizes contains a comma-separated list, so split on the bracket first
    let (head, rest) = inner
        .split_once('[')
        .ok_or_else(|| Error::Snapshot("missing sizes list".into()))?;
    let (sizes_str, tail) = rest
        .split_once(']')
        .ok_or_else(|| Error::Snapshot("unterminated sizes list".into()))?;
    let mut head_parts = head.split(',');
    let dim: usize = field(head_parts.next(), "dim")?
        .parse()
        .map_err(|_| Error::Snapshot("dim is not an integer".into()))?;
    let sizes_key = head_parts.next().unwrap_or("").trim();
    if sizes_key != "sizes:" {
        return Err(Error::Snapshot(format!(
            "expected `sizes:`, found `{sizes_key}`"
        )));
    }
    let sizes: Vec<usize> = sizes_str
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Snapshot("sizes are not integers".into()))?;
    let mut tail_parts = tail.trim_start_matches(',').split(',');
    let n_components: usize = field(tail_parts.next(), "n_components")?
        .parse()
        .map_err(|_| Error::Snapshot("n_components is not an integer".into()))?;
    let time: f64 = field(tail_parts.next(), "time")?
        .parse()
        .map_err(|_| Error::Snapshot("time is not a number".into()))?;
    if tail_parts.next().is_some() {
        return Err(Error::Snapshot("trailing header entries".into()));
    }
    if sizes.len() != dim {
        return Err(Error::Snapshot(format!(
            "dim {dim} disagrees with {} sizes",
            sizes.len()
        )));
    }
    let shape = Shape::new(&sizes).map_err(|e| Error::Snapshot(e.to_string()))?;
    if n_components == 0 {
        return Err(Error::Snapshot("n_components must be positive".into()));
    }
    Ok((shape, n_components, time))
}

pub fn read_snapshot<R: Read>(r: R) -> Result<Snapshot> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let (shape, n_components, time) = parse_header(&line)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let expected = n_components * shape.len() * 8;
    if payload.len() != expected {
        return Err(Error::Snapshot(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    let components = values.chunks(shape.len()).map(|c| c.to_vec()).collect();
    Ok(Snapshot {
        shape,
        time,
        components,
    })
}
