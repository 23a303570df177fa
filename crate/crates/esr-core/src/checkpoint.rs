//! Parameter checkpoint files.
//!
//! Text layout, one parameter after another in registration order:
//!
//! ```text
//! esr-checkpoint v1
//! frozen=<true|false>
//! params=<count>
//! param <name> <rank> <dim0> [dim1] [dim2]
//! <16 hex digits of the IEEE-754 bit pattern, one value per line>
//! ...
//! ```
//!
//! Values are stored as raw f64 bits, so write→read round-trips bit-exactly
//! and re-saving an unchanged model is byte-identical.

use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::params::ParamSet;

const MAGIC: &str = "esr-checkpoint v1";

/// A parameter set plus its frozen marker as read from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub frozen: bool,
    pub params: ParamSet,
}

pub fn save(path: &Path, params: &ParamSet, frozen: bool) -> Result<()> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("frozen={frozen}\n"));
    out.push_str(&format!("params={}\n", params.len()));
    for (name, tensor) in params.iter() {
        if name.contains(char::is_whitespace) {
            return Err(Error::Invalid(format!(
                "parameter name {name:?} contains whitespace"
            )));
        }
        out.push_str(&format!("param {name} {}", tensor.rank()));
        for d in tensor.shape() {
            out.push_str(&format!(" {d}"));
        }
        out.push('\n');
        for v in tensor.data() {
            out.push_str(&format!("{:016x}\n", v.to_bits()));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String)> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("unexpected end of file, expected {expect}"),
            })
    };

    let (line, magic) = next("magic header")?;
    if magic != MAGIC {
        return Err(parse_err(line, format!("bad magic {magic:?}")));
    }
    let (line, frozen_line) = next("frozen marker")?;
    let frozen = match frozen_line.strip_prefix("frozen=") {
        Some("true") => true,
        Some("false") => false,
        _ => return Err(parse_err(line, format!("bad frozen marker {frozen_line:?}"))),
    };
    let (line, count_line) = next("parameter count")?;
    let count: usize = count_line
        .strip_prefix("params=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(line, format!("bad parameter count {count_line:?}")))?;

    let mut params = ParamSet::new();
    for _ in 0..count {
        let (line, header) = next("param header")?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("param") {
            return Err(parse_err(line, format!("expected param header, got {header:?}")));
        }
        let name = toks
            .next()
            .ok_or_else(|| parse_err(line, "param header missing name".into()))?
            .to_string();
        let rank: usize = toks
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line, "param header missing rank".into()))?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d: usize = toks
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(line, "param header missing dimension".into()))?;
            shape.push(d);
        }
        if toks.next().is_some() {
            return Err(parse_err(line, format!("trailing tokens in param header {header:?}")));
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, hex) = next("value line")?;
            let bits = u64::from_str_radix(hex.trim(), 16)
                .map_err(|_| parse_err(line, format!("bad value line {hex:?}")))?;
            data.push(f64::from_bits(bits));
        }
        params.push(name, Tensor::from_vec(&shape, data)?)?;
    }
    if lines.next().is_some() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "trailing content after final parameter".into(),
        });
    }
    Ok(Checkpoint { frozen, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Lcg64;

    fn sample_params(seed: u64) -> ParamSet {
        let mut rng = Lcg64::new(seed);
        let mut p = ParamSet::new();
        let t = |rng: &mut Lcg64, shape: &[usize]| {
            let n: usize = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap()
        };
        p.push("head.w", t(&mut rng, &[4, 1, 3])).unwrap();
        p.push("head.b", t(&mut rng, &[4])).unwrap();
        p.push("fc.w", t(&mut rng, &[9, 8])).unwrap();
        p
    }

    #[test]
    fn round_trip_is_bit_exact_and_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = sample_params(5);
        save(&path, &params, true).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let loaded = load(&path).unwrap();
        assert!(loaded.frozen);
        assert_eq!(loaded.params.len(), params.len());
        for ((n1, t1), (n2, t2)) in loaded.params.iter().zip(params.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        save(&path, &loaded.params, true).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn frozen_marker_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&path, &sample_params(1), false).unwrap();
        assert!(!load(&path).unwrap().frozen);
    }

    #[test]
    fn special_values_survive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut p = ParamSet::new();
        p.push("v", Tensor::vector(vec![0.0, -0.0, 1e-308, f64::MAX, -1.5e-17]))
            .unwrap();
        save(&path, &p, false).unwrap();
        let loaded = load(&path).unwrap();
        for (a, b) in loaded.params.tensors()[0].data().iter().zip(p.tensors()[0].data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        std::fs::write(&path, "not a checkpoint\n").unwrap();
        assert!(load(&path).is_err());

        let params = sample_params(2);
        save(&path, &params, true).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("garbage\n");
        std::fs::write(&path, text).unwrap();
        assert!(load(&path).is_err());
    }
}
