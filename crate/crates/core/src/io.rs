//! On-disk formats.
//!
//! Pool files start with the 8-byte magic `CBPOOL01`, then a little-endian
//! `u64` header length and a JSON [`PoolHeader`]. When `has_matrices` is set
//! the matrices follow as little-endian `f64`, each row-major, with complex
//! entries stored as `re, im` pairs.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{PipelineConfig, SamplingMode};
use crate::ensembles::{regenerate_pool, Element, EnsembleSpec, Field, MatrixPool, Regime, SeedRecord};
use crate::error::{Error, Result};

pub const POOL_MAGIC: &[u8; 8] = b"CBPOOL01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolHeader {
    pub dim: usize,
    pub size: usize,
    pub field: Field,
    pub regime: Regime,
    pub scale: f64,
    pub seed_record: SeedRecord,
    pub has_matrices: bool,
}

impl PoolHeader {
    pub fn spec(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::new(self.dim, self.scale, self.regime, self.field)
    }
}

pub fn write_pool<T: Element, W: Write>(pool: &MatrixPool<T>, include_matrices: bool, mut out: W) -> Result<()> {
    let spec = pool.spec();
    let header = PoolHeader {
        dim: spec.dim,
        size: pool.len(),
        field: spec.field,
        regime: spec.regime,
        scale: spec.scale,
        seed_record: pool.seed_record().clone(),
        has_matrices: include_matrices,
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(POOL_MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    if include_matrices {
        let complex = spec.field == Field::ProperComplex;
        for x in pool.matrices() {
            for r in 0..x.nrows() {
                for c in 0..x.ncols() {
                    let (re, im) = x[(r, c)].parts();
                    out.write_all(&re.to_le_bytes())?;
                    if complex {
                        out.write_all(&im.to_le_bytes())?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_pool_header<R: Read>(input: &mut R) -> Result<PoolHeader> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != POOL_MAGIC {
        return Err(Error::Parse("not a pool file".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 32 {
        return Err(Error::Parse(format!("pool header of {len} bytes")));
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json)?;
    let header: PoolHeader = serde_json::from_slice(&json)?;
    if header.seed_record.stream_ids.len() != header.size {
        return Err(Error::Parse("seed record does not match pool size".into()));
    }
    Ok(header)
}

/// Reads a pool; pools stored without matrices are regenerated from their
/// seed record.
pub fn read_pool<T: Element, R: Read>(mut input: R) -> Result<MatrixPool<T>> {
    let header = read_pool_header(&mut input)?;
    let spec = header.spec()?;
    if spec.field != T::FIELD {
        return Err(Error::InvalidEnsemble(format!("pool holds {:?} matrices", spec.field)));
    }
    if !header.has_matrices {
        return regenerate_pool(spec, &header.seed_record);
    }
    let complex = spec.field == Field::ProperComplex;
    let m = header.dim;
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<f64> {
        input.read_exact(&mut word)?;
        Ok(f64::from_le_bytes(word))
    };
    let mut matrices = Vec::with_capacity(header.size);
    for _ in 0..header.size {
        let mut data = Vec::with_capacity(m * m);
        for _ in 0..m * m {
            let re = next(&mut input)?;
            let im = if complex { next(&mut input)? } else { 0.0 };
            data.push(T::from_parts(re, im));
        }
        matrices.push(DMatrix::from_row_slice(m, m, &data));
    }
    MatrixPool::from_parts(spec, matrices, header.seed_record)
}

/// Input document for a pipeline simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub realisations: u64,
    pub slabs: u64,
    pub pool1_size: u64,
    pub pool2_size: u64,
    pub slabs_per_section: u64,
    pub dim: usize,
    pub scale: f64,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    #[serde(default = "default_field")]
    pub field: Field,
    #[serde(default = "default_mode")]
    pub mode: SamplingMode,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_regime() -> Regime {
    Regime::Diffusive
}

fn default_field() -> Field {
    Field::Real
}

fn default_mode() -> SamplingMode {
    SamplingMode::WithoutReplacement
}

impl SimulationConfig {
    /// Accepts JSON, or flat `key = value` lines with `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        let mut map = serde_json::Map::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", no + 1)))?;
            let value = value.trim().trim_matches('"');
            let json = serde_json::from_str::<serde_json::Value>(value)
                .ok()
                .filter(|v| v.is_number())
                .unwrap_or_else(|| serde_json::Value::String(value.to_string()));
            map.insert(key.trim().replace('-', "_"), json);
        }
        Ok(serde_json::from_value(serde_json::Value::Object(map))?)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        PipelineConfig::with_derived_sections(
            self.realisations,
            self.slabs,
            self.pool1_size,
            self.pool2_size,
            self.slabs_per_section,
        )
    }

    pub fn spec(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::new(self.dim, self.scale, self.regime, self.field)
    }
}

/// Renders rows as CSV; fields containing separators are quoted.
pub fn to_csv<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> String {
    let quote = |s: &str| {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let mut out = header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|c| quote(c.as_ref())).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::generate_pool;
    use num_complex::Complex64;

    #[test]
    fn pool_round_trip() {
        let spec = EnsembleSpec::new(3, 0.7, Regime::Ballistic, Field::ProperComplex).unwrap();
        let pool: MatrixPool<Complex64> = generate_pool(spec, 4, 11).unwrap();
        for include in [true, false] {
            let mut buf = Vec::new();
            write_pool(&pool, include, &mut buf).unwrap();
            let back: MatrixPool<Complex64> = read_pool(buf.as_slice()).unwrap();
            assert_eq!(back, pool);
        }
        let mut buf = Vec::new();
        write_pool(&pool, true, &mut buf).unwrap();
        assert!(read_pool::<f64, _>(buf.as_slice()).is_err());
        buf[0] = b'X';
        assert!(read_pool::<Complex64, _>(buf.as_slice()).is_err());
    }

    #[test]
    fn config_formats_agree() {
        let json = r#"{"realisations": 10, "slabs": 6, "pool1_size": 8, "pool2_size": 5,
            "slabs_per_section": 3, "dim": 2, "scale": 1.0, "regime": "ballistic"}"#;
        let flat = "realisations = 10\nslabs = 6 # total\npool1-size = 8\npool2_size = 5\n\
                    slabs_per_section = 3\ndim = 2\nscale = 1.0\nregime = ballistic\n";
        let a = SimulationConfig::parse(json).unwrap();
        assert_eq!(a, SimulationConfig::parse(flat).unwrap());
        assert_eq!(a.pipeline().unwrap().sections, 2);
        assert!(SimulationConfig::parse("dim = 2\nbogus = 1").is_err());
    }

    #[test]
    fn csv_quoting() {
        let s = to_csv(&["a", "b"], &[vec!["1", "x,y"]]);
        assert_eq!(s, "a,b\n1,\"x,y\"\n");
    }
}
