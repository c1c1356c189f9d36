//! JSON schemas for models, states and frames; CSV trajectories.
//!
//! Complex matrices are nested row arrays of `[re, im]` pairs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::purity_trace_norm;
use crate::gkls::{LindbladModel, Trajectory};
use crate::linalg::{c, CMatrix};
use crate::state::DensityMatrix;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, n: usize, what: &str) -> Result<CMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what} must be {n}x{n}")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// Who produced a file and with what inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub program: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub params: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, params: serde_json::Value) -> Self {
        Self {
            program: "gapflag".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            params,
        }
    }

    /// `# key: value` lines for CSV headers.
    pub fn header_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# program: {} {}", self.program, self.version),
            format!("# command: {}", self.command),
        ];
        if let Some(s) = self.seed {
            out.push(format!("# seed: {s}"));
        }
        out.push(format!("# params: {}", self.params));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    #[serde(rename = "H")]
    pub h: JsonMatrix,
    #[serde(default)]
    pub jumps: Vec<JsonMatrix>,
    #[serde(default)]
    pub rates: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(m: &LindbladModel) -> Self {
        Self {
            n: m.n(),
            h: matrix_to_json(m.hamiltonian()),
            jumps: m.jumps().iter().map(matrix_to_json).collect(),
            rates: m.rates().to_vec(),
        }
    }

    pub fn to_model(&self) -> Result<LindbladModel> {
        let h = matrix_from_json(&self.h, self.n, "H")?;
        let jumps = self
            .jumps
            .iter()
            .enumerate()
            .map(|(k, l)| matrix_from_json(l, self.n, &format!("jump {k}")))
            .collect::<Result<Vec<_>>>()?;
        LindbladModel::new(h, jumps, self.rates.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub n: usize,
    pub rho: JsonMatrix,
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        Self { n: rho.n(), rho: matrix_to_json(rho.matrix()) }
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(matrix_from_json(&self.rho, self.n, "rho")?)
    }
}

pub fn parse_model(text: &str) -> Result<LindbladModel> {
    let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("model: {e}")))?;
    f.to_model()
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let f: StateFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("state: {e}")))?;
    f.to_state()
}

/// Trajectory as CSV: provenance comment block, then
/// `t,r_1..r_{n-1},purity_R,trace_error,min_eigenvalue,min_gap`.
pub fn write_trajectory_csv<W: Write>(w: &mut W, traj: &Trajectory, prov: &Provenance) -> std::io::Result<()> {
    for line in prov.header_lines() {
        writeln!(w, "{line}")?;
    }
    if let Some(tb) = traj.breakdown {
        writeln!(w, "# breakdown: {tb}")?;
    }
    let n = traj.n();
    let mut head = vec!["t".to_string()];
    head.extend((1..n).map(|a| format!("r_{a}")));
    head.extend(["purity_R", "trace_error", "min_eigenvalue", "min_gap"].map(String::from));
    writeln!(w, "{}", head.join(","))?;
    for p in &traj.points {
        let mut row = vec![p.t.to_string()];
        row.extend(p.gaps.iter().map(|x| x.to_string()));
        row.push(purity_trace_norm(&p.rho).to_string());
        row.push(p.diagnostics.trace_error.to_string());
        row.push(p.diagnostics.min_eigenvalue.to_string());
        row.push(p.diagnostics.min_gap.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gkls::{integrate_direct, IntegrationOptions};
    use crate::montecarlo::shard_rng;

    #[test]
    fn model_round_trip() {
        let mut rng = shard_rng(51, 0);
        let m = LindbladModel::random(3, &mut rng);
        let text = serde_json::to_string(&ModelFile::from_model(&m)).unwrap();
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(parse_state(r#"{"n":2,"rho":[[[1,0]]]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_model("{"), Err(Error::Parse(_))));
        let not_psd = r#"{"n":2,"rho":[[[1.5,0],[0,0]],[[0,0],[-0.5,0]]]}"#;
        assert!(matches!(parse_state(not_psd), Err(Error::InvalidState(_))));
    }

    #[test]
    fn csv_layout() {
        let rho = DensityMatrix::new(crate::linalg::diag_complex(&[0.7, 0.3])).unwrap();
        let m = LindbladModel::new(CMatrix::zeros(2, 2), vec![], vec![]).unwrap();
        let traj = integrate_direct(&rho, &m, 0.1, 0.05, &IntegrationOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj, &Provenance::new("evolve", Some(3), serde_json::json!({"dt": 0.05}))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# program: gapflag"));
        assert!(lines.contains(&"# seed: 3"));
        let header = lines.iter().position(|l| l.starts_with("t,")).unwrap();
        assert_eq!(lines[header], "t,r_1,purity_R,trace_error,min_eigenvalue,min_gap");
        assert_eq!(lines.len() - header - 1, 3);
    }
}
