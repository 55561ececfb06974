//! Grid-function file format and CSV export.
//!
//! Binary layout: one ASCII header line
//!
//! ```text
//! nehari-grid v1; dim=<d>; kind=<dirichlet|periodic>; shape=<n1,...>; lengths=<l1,...>
//! ```
//!
//! terminated by `\n`, followed by the node values as little-endian `f64` in
//! row-major order. For a torus `lengths` holds the integer periods and the
//! shape fixes the points per unit cell.

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{DomainKind, DomainSpec, GridFunction};
use crate::error::{Error, Result};

const MAGIC: &str = "nehari-grid v1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn header(domain: &DomainSpec) -> String {
    let kind = match domain.kind() {
        DomainKind::Dirichlet { .. } => "dirichlet",
        DomainKind::Periodic { .. } => "periodic",
    };
    format!(
        "{MAGIC}; dim={}; kind={kind}; shape={}; lengths={}\n",
        domain.dim(),
        join(domain.shape()),
        join(&domain.lengths())
    )
}

pub fn write_grid_function<W: Write>(mut w: W, f: &GridFunction) -> Result<()> {
    w.write_all(header(f.domain()).as_bytes())?;
    let mut buf = Vec::with_capacity(8 * f.values().len());
    for x in f.values() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("grid file: {}", msg.into()))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| bad(format!("bad list entry `{x}`"))))
        .collect()
}

pub fn read_grid_function<R: BufRead>(mut r: R) -> Result<GridFunction> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let line = line.trim_end_matches('\n');
    let mut parts = line.split(';').map(str::trim);
    if parts.next() != Some(MAGIC) {
        return Err(bad("missing magic header"));
    }
    let (mut dim, mut kind, mut shape, mut lengths) = (None, None, None, None);
    for part in parts {
        let (key, value) = part.split_once('=').ok_or_else(|| bad(format!("bad field `{part}`")))?;
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad("bad dim"))?),
            "kind" => kind = Some(value.to_string()),
            "shape" => shape = Some(parse_list::<usize>(value)?),
            "lengths" => lengths = Some(parse_list::<f64>(value)?),
            _ => return Err(bad(format!("unknown field `{key}`"))),
        }
    }
    let (dim, kind, shape, lengths) = match (dim, kind, shape, lengths) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(bad("incomplete header")),
    };
    if shape.len() != dim || lengths.len() != dim {
        return Err(bad("dimension does not match shape/lengths"));
    }
    let domain = match kind.as_str() {
        "dirichlet" => DomainSpec::dirichlet(&lengths, &shape)?,
        "periodic" => {
            let periods: Vec<usize> = lengths
                .iter()
                .map(|&l| {
                    if l.fract() == 0.0 && l > 0.0 {
                        Ok(l as usize)
                    } else {
                        Err(bad("periodic lengths must be integers"))
                    }
                })
                .collect::<Result<_>>()?;
            let cells: Vec<usize> = shape
                .iter()
                .zip(&periods)
                .map(|(&n, &p)| {
                    if n % p == 0 {
                        Ok(n / p)
                    } else {
                        Err(bad("shape is not a multiple of the period"))
                    }
                })
                .collect::<Result<_>>()?;
            DomainSpec::periodic_with(&periods, &cells)?
        }
        other => return Err(bad(format!("unknown kind `{other}`"))),
    };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * domain.len() {
        return Err(bad(format!(
            "expected {} value bytes, found {}",
            8 * domain.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    GridFunction::new(Arc::new(domain), values)
}

/// CSV with index coordinates and value: `i1[,i2[,i3]],value`.
pub fn write_csv<W: Write>(mut w: W, f: &GridFunction) -> Result<()> {
    let d = f.domain();
    let head: Vec<String> = (1..=d.dim()).map(|a| format!("i{a}")).collect();
    writeln!(w, "{},value", head.join(","))?;
    for (i, x) in f.values().iter().enumerate() {
        let idx = d.multi_index(i);
        writeln!(w, "{},{:.16e}", join(&idx), x)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_format_round_trips(values in proptest::collection::vec(-1e6f64..1e6, 12), periodic in any::<bool>()) {
            let domain = if periodic {
                DomainSpec::periodic_with(&[1, 3], &[2, 2]).unwrap()
            } else {
                DomainSpec::dirichlet(&[1.5, 0.25], &[3, 4]).unwrap()
            };
            let f = GridFunction::new(Arc::new(domain), values).unwrap();
            let mut buf = Vec::new();
            write_grid_function(&mut buf, &f).unwrap();
            let g = read_grid_function(&buf[..]).unwrap();
            prop_assert_eq!(g, f);
        }
    }

    #[test]
    fn header_is_bit_exact() {
        let d = Arc::new(DomainSpec::periodic(&[16, 16], 4).unwrap());
        let f = GridFunction::zeros(d);
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &f).unwrap();
        let text = String::from_utf8_lossy(&buf[..buf.iter().position(|&b| b == b'\n').unwrap() + 1]).to_string();
        assert_eq!(
            text,
            "nehari-grid v1; dim=2; kind=periodic; shape=64,64; lengths=16,16\n"
        );
        assert_eq!(buf.len(), text.len() + 8 * 64 * 64);
    }

    #[test]
    fn rejects_truncated_payload() {
        let d = Arc::new(DomainSpec::dirichlet(&[1.0], &[4]).unwrap());
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &GridFunction::zeros(d)).unwrap();
        buf.pop();
        assert!(read_grid_function(&buf[..]).is_err());
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let d = Arc::new(DomainSpec::dirichlet(&[1.0, 1.0], &[2, 1]).unwrap());
        let f = GridFunction::new(d, vec![0.1, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &f).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "i1,i2,value\n0,0,1.0000000000000001e-1\n1,0,-2.0000000000000000e0\n"
        );
    }
}
