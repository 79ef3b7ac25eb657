//! Plain-text state files keyed by mesh fingerprint.
//!
//! ```text
//! gpe-state 1
//! fingerprint 9c1e0f27a4d3b851
//! nodes 3
//! 0 0
//! 0.5 -0.25
//! 0 0
//! ```
//!
//! Values are written in shortest round-trip form, so a reload is
//! bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex;

use crate::assembly::StateVector;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;

const MAGIC: &str = "gpe-state 1";

pub fn write_state<T: Real>(mesh: &Mesh<T>, u: &[Complex<T>]) -> Result<String> {
    if u.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch { expected: mesh.n_nodes(), got: u.len() });
    }
    let mut s = String::with_capacity(u.len() * 40);
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "fingerprint {:016x}", mesh.fingerprint());
    let _ = writeln!(s, "nodes {}", u.len());
    for z in u {
        let _ = writeln!(s, "{} {}", z.re, z.im);
    }
    Ok(s)
}

pub fn read_state<T: Real>(mesh: &Mesh<T>, text: &str) -> Result<StateVector<T>> {
    let bad = |m: String| Error::StateFile(m);
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<String> {
        let (no, line) = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
        if key == MAGIC {
            return if line.trim() == MAGIC { Ok(String::new()) } else { Err(bad(format!("line {}: not a state file", no + 1))) };
        }
        line.trim()
            .strip_prefix(key)
            .map(|v| v.trim().to_string())
            .ok_or_else(|| bad(format!("line {}: expected `{key}`", no + 1)))
    };
    header(MAGIC)?;
    let fp = header("fingerprint")?;
    let want = format!("{:016x}", mesh.fingerprint());
    if fp != want {
        return Err(bad(format!("mesh fingerprint {fp} does not match {want}")));
    }
    let n: usize = header("nodes")?.parse().map_err(|_| bad("bad node count".into()))?;
    if n != mesh.n_nodes() {
        return Err(Error::DimensionMismatch { expected: mesh.n_nodes(), got: n });
    }
    let mut u = Vec::with_capacity(n);
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut field = || -> Result<T> {
            it.next()
                .and_then(|s| s.parse::<T>().ok())
                .ok_or_else(|| bad(format!("line {}: expected two numbers", no + 1)))
        };
        u.push(Complex::new(field()?, field()?));
    }
    if u.len() != n {
        return Err(bad(format!("expected {n} values, found {}", u.len())));
    }
    Ok(u)
}

pub fn save_state<T: Real>(path: &Path, mesh: &Mesh<T>, u: &[Complex<T>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, write_state(mesh, u)?)?;
    Ok(())
}

pub fn load_state<T: Real>(path: &Path, mesh: &Mesh<T>) -> Result<StateVector<T>> {
    read_state(mesh, &fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn file_round_trip() {
        let mesh = Mesh::<f64>::rectangle((0.0, 1.0), (0.0, 2.0), 3, 4).unwrap();
        let u: Vec<_> = (0..mesh.n_nodes()).map(|i| Complex::new((i as f64).sin() / 3.0, 1e-300 * i as f64)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/gs.txt");
        save_state(&path, &mesh, &u).unwrap();
        let back = load_state(&path, &mesh).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn rejects_other_mesh() {
        let a = Mesh::<f64>::interval(0.0, 1.0, 4).unwrap();
        let b = Mesh::<f64>::interval(0.0, 1.0, 5).unwrap();
        let c = Mesh::<f64>::interval(0.0, 2.0, 4).unwrap();
        let u = vec![Complex::new(1.0, 0.0); 5];
        let text = write_state(&a, &u).unwrap();
        assert!(matches!(read_state(&b, &text), Err(Error::StateFile(_))));
        assert!(matches!(read_state(&c, &text), Err(Error::StateFile(_))));
    }

    #[test]
    fn rejects_garbage() {
        let m = Mesh::<f64>::interval(0.0, 1.0, 2).unwrap();
        assert!(read_state(&m, "hello").is_err());
        let good = write_state(&m, &[Complex::new(0.0, 0.0); 3]).unwrap();
        let truncated: String = good.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(read_state(&m, &truncated).is_err());
        assert!(read_state(&m, &good.replace("0 0\n", "0 x\n")).is_err());
    }

    #[test]
    fn f32_round_trip() {
        let m = Mesh::<f32>::interval(0.0, 1.0, 2).unwrap();
        let u = vec![Complex::new(0.1f32, -7.3e-20), Complex::new(1.0 / 3.0, 0.0), Complex::new(f32::MIN_POSITIVE, 2.5)];
        assert_eq!(read_state(&m, &write_state(&m, &u).unwrap()).unwrap(), u);
    }

    proptest! {
        #[test]
        fn values_are_bit_identical(vals in proptest::collection::vec((any::<f64>(), any::<f64>()), 6)) {
            prop_assume!(vals.iter().all(|(a, b)| a.is_finite() && b.is_finite()));
            let m = Mesh::<f64>::interval(-1.0, 1.0, 5).unwrap();
            let u: Vec<_> = vals.iter().map(|&(a, b)| Complex::new(a, b)).collect();
            let back = read_state(&m, &write_state(&m, &u).unwrap()).unwrap();
            for (x, y) in u.iter().zip(&back) {
                prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }
}
