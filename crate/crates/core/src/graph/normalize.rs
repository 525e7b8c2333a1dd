use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ContractGraph;
use crate::ast::NodeId;
use crate::error::GraphError;
use crate::linalg::Matrix;

/// Magic prefix of the binary graph container.
pub const GRAPH_MAGIC: &[u8; 4] = b"SGG1";

/// GCN input: features plus `Â = A + I` and `D̂^{-1/2} Â D̂^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedGraph {
    pub node_ids: Vec<NodeId>,
    pub features: Matrix,
    pub a_hat: Matrix,
    pub s_hat: Matrix,
}

pub fn normalize(g: &ContractGraph) -> Result<NormalizedGraph, GraphError> {
    NormalizedGraph::from_adjacency(g.node_ids(), &g.adjacency, g.features.clone())
}

impl NormalizedGraph {
    pub fn from_adjacency(
        node_ids: Vec<NodeId>,
        adjacency: &Matrix,
        features: Matrix,
    ) -> Result<Self, GraphError> {
        let n = adjacency.rows();
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        if adjacency.cols() != n || features.rows() != n || node_ids.len() != n {
            return Err(GraphError::InvalidArgument(format!(
                "adjacency {:?}, features {:?}, {} node ids",
                adjacency.shape(),
                features.shape(),
                node_ids.len()
            )));
        }
        let mut a_hat = adjacency.clone();
        for i in 0..n {
            a_hat[(i, i)] += 1.0;
        }
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| 1.0 / a_hat.row(i).iter().sum::<f64>().sqrt())
            .collect();
        let mut s_hat = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let a = a_hat[(i, j)];
                if a != 0.0 {
                    s_hat[(i, j)] = inv_sqrt[i] * a * inv_sqrt[j];
                }
            }
        }
        Ok(NormalizedGraph {
            node_ids,
            features,
            a_hat,
            s_hat,
        })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn feature_width(&self) -> usize {
        self.features.cols()
    }

    /// Writes the `SGG1` container: magic, `n` and `d` as little-endian
    /// `u64`, `n` node ids as `i64`, then `features` (n×d), `a_hat` (n×n)
    /// and `s_hat` (n×n) as row-major little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        w.write_all(GRAPH_MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.feature_width() as u64).to_le_bytes())?;
        for id in &self.node_ids {
            w.write_all(&id.to_le_bytes())?;
        }
        for m in [&self.features, &self.a_hat, &self.s_hat] {
            for x in m.as_slice() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, GraphError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRAPH_MAGIC {
            return Err(GraphError::BadContainer(format!("bad magic {magic:?}")));
        }
        let n = read_len(&mut r)?;
        let d = read_len(&mut r)?;
        let mut node_ids = Vec::with_capacity(n);
        for _ in 0..n {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            node_ids.push(i64::from_le_bytes(b));
        }
        let features = read_matrix(&mut r, n, d)?;
        let a_hat = read_matrix(&mut r, n, n)?;
        let s_hat = read_matrix(&mut r, n, n)?;
        Ok(NormalizedGraph {
            node_ids,
            features,
            a_hat,
            s_hat,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn read_len<R: Read>(r: &mut R) -> Result<usize, GraphError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let v = u64::from_le_bytes(b);
    // Guards allocation against corrupt headers.
    if v > 1 << 24 {
        return Err(GraphError::BadContainer(format!(
            "implausible dimension {v}"
        )));
    }
    Ok(v as usize)
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix, GraphError> {
    let mut data = Vec::with_capacity(rows * cols);
    let mut b = [0u8; 8];
    for _ in 0..rows * cols {
        r.read_exact(&mut b)?;
        data.push(f64::from_le_bytes(b));
    }
    Matrix::from_vec(rows, cols, data).map_err(|e| GraphError::BadContainer(e.to_string()))
}
