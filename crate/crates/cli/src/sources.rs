//! Source specifications: named families or a JSON file path.
//!
//! Accepted forms:
//!   `dsbs:0.1`                 doubly symmetric binary source
//!   `uniform:2x3`              uniform joint over a 2×3 alphabet
//!   `product:0.3,0.7;0.5,0.5`  independent product of two marginals
//!   anything else              path to a JointPmf JSON file

use std::path::Path;
use wakgw_core::prob::{dsbs, product_joint, uniform_joint, JointPmf, JointPmfFile, Pmf};
use wakgw_core::{Error, Result};

pub fn parse_source(spec: &str) -> Result<JointPmf> {
    if let Some(p) = spec.strip_prefix("dsbs:") {
        let p: f64 = p
            .parse()
            .map_err(|_| Error::Schema(format!("dsbs expects a probability, got `{p}`")))?;
        return dsbs(p);
    }
    if let Some(dims) = spec.strip_prefix("uniform:") {
        let (dx, dy) = dims
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Schema(format!("uniform expects DXxDY, got `{dims}`")))?;
        let dx: usize = dx
            .parse()
            .map_err(|_| Error::Schema(format!("bad alphabet size `{dx}`")))?;
        let dy: usize = dy
            .parse()
            .map_err(|_| Error::Schema(format!("bad alphabet size `{dy}`")))?;
        return uniform_joint(dx, dy);
    }
    if let Some(margins) = spec.strip_prefix("product:") {
        let (px, py) = margins.split_once(';').ok_or_else(|| {
            Error::Schema(format!("product expects two ;-separated pmfs, got `{margins}`"))
        })?;
        let parse_pmf = |s: &str| -> Result<Pmf> {
            let probs: std::result::Result<Vec<f64>, _> =
                s.split(',').map(|v| v.trim().parse::<f64>()).collect();
            Pmf::new(probs.map_err(|_| Error::Schema(format!("bad pmf entry in `{s}`")))?)
        };
        return product_joint(&parse_pmf(px)?, &parse_pmf(py)?);
    }
    JointPmfFile::load(Path::new(spec))
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("bad number `{v}` in list `{s}`")))
        })
        .collect()
}

pub fn parse_u32_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| Error::Schema(format!("bad integer `{v}` in list `{s}`")))
        })
        .collect()
}
