//! Graph convolution operators.
//!
//! Features are row vectors: `X` is `nodes x features` and weights are
//! `in x out`. The adjacency convention is `A[i][j] = 1` for an edge
//! `i -> j`; undirected layers are symmetric.

use std::rc::Rc;

use crate::autodiff::{Matrix, Propagation, Tape, Var};
use crate::error::{Error, Result};
use crate::mln::LayerGraph;

/// Edge list of one layer (or of a block-diagonal batch of layers).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub directed: bool,
}

impl Adjacency {
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>, directed: bool) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= num_nodes || v >= num_nodes) {
            return Err(Error::MalformedGraph(format!(
                "edge ({u}, {v}) out of range for {num_nodes} nodes"
            )));
        }
        Ok(Adjacency {
            num_nodes,
            edges,
            directed,
        })
    }

    pub fn from_layer(layer: &LayerGraph) -> Self {
        Adjacency {
            num_nodes: layer.num_nodes(),
            edges: layer.edges.clone(),
            directed: layer.directed,
        }
    }

    /// `(source, target)` pairs along which features flow into the target:
    /// in-edges for directed layers, both directions for undirected ones.
    pub fn messages(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges.len() * 2);
        for &(u, v) in &self.edges {
            out.push((u, v));
            if !self.directed {
                out.push((v, u));
            }
        }
        out
    }

    /// Dense `A` with `A[i][j] = 1` for every edge `i -> j`.
    pub fn dense(&self) -> Matrix {
        let mut a = Matrix::zeros(self.num_nodes, self.num_nodes);
        for &(u, v) in &self.edges {
            a[(u, v)] = 1.0;
            if !self.directed {
                a[(v, u)] = 1.0;
            }
        }
        a
    }

    /// Sparse form of `D^-1/2 (A + I) D^-1/2` with `D` the row sums of
    /// `A + I`. Row `i` reads from every `j` with `A[i][j] = 1`, plus itself.
    pub fn gcn_propagation(&self) -> Propagation {
        let mut pairs: Vec<(usize, usize)> = (0..self.num_nodes).map(|i| (i, i)).collect();
        for &(u, v) in &self.edges {
            pairs.push((u, v));
            if !self.directed {
                pairs.push((v, u));
            }
        }
        let mut degree = vec![0.0f64; self.num_nodes];
        for &(i, _) in &pairs {
            degree[i] += 1.0;
        }
        let entries = pairs
            .into_iter()
            .map(|(i, j)| (i, j, 1.0 / (degree[i] * degree[j]).sqrt()))
            .collect();
        Propagation {
            num_out: self.num_nodes,
            num_in: self.num_nodes,
            entries,
        }
    }

    /// Unweighted neighbour sum: row `i` receives `sum_{j -> i} x_j`.
    pub fn neighbor_sum(&self) -> Propagation {
        Propagation {
            num_out: self.num_nodes,
            num_in: self.num_nodes,
            entries: self
                .messages()
                .into_iter()
                .map(|(src, dst)| (dst, src, 1.0))
                .collect(),
        }
    }

    /// Message pairs plus one self-loop per node, as (sources, targets).
    pub fn attention_edges(&self) -> (Vec<usize>, Vec<usize>) {
        let messages = self.messages();
        let mut src = Vec::with_capacity(messages.len() + self.num_nodes);
        let mut dst = Vec::with_capacity(messages.len() + self.num_nodes);
        for i in 0..self.num_nodes {
            src.push(i);
            dst.push(i);
        }
        for (s, d) in messages {
            src.push(s);
            dst.push(d);
        }
        (src, dst)
    }
}

fn check_rows(op: &'static str, tape: &Tape, adj: &Adjacency, x: Var) -> Result<()> {
    let rows = tape.value(x).rows();
    if rows != adj.num_nodes {
        return Err(Error::ShapeMismatch {
            op,
            left: tape.value(x).shape(),
            right: (adj.num_nodes, adj.num_nodes),
        });
    }
    Ok(())
}

/// `X' = D^-1/2 (A + I) D^-1/2 X Theta`
pub fn gcn(tape: &mut Tape, adj: &Adjacency, x: Var, theta: Var) -> Result<Var> {
    check_rows("gcn", tape, adj, x)?;
    let projected = tape.matmul(x, theta)?;
    tape.propagate(projected, Rc::new(adj.gcn_propagation()))
}

/// `x'_i = x_i W1 + (sum_{j in N(i)} x_j) W2`, all edge weights 1.
pub fn graph_conv(tape: &mut Tape, adj: &Adjacency, x: Var, w1: Var, w2: Var) -> Result<Var> {
    check_rows("graph_conv", tape, adj, x)?;
    let own = tape.matmul(x, w1)?;
    let neighbors = tape.propagate(x, Rc::new(adj.neighbor_sum()))?;
    let incoming = tape.matmul(neighbors, w2)?;
    tape.add(own, incoming)
}

/// One attention head's parameters on the tape.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    /// `2 * in x out`; the top half acts on the target node, the bottom
    /// half on the source node.
    pub theta: Var,
    /// `out x 1`
    pub attention: Var,
}

/// Multi-head GATv2 output plus each head's attention coefficients (one
/// per attention edge, ordered as [`Adjacency::attention_edges`]).
pub struct GatV2Output {
    pub output: Var,
    pub alphas: Vec<Var>,
}

/// GATv2 with self-loops. Per head:
///
/// `z_ij = Theta [x_i || x_j] = x_i Theta_top + x_j Theta_bottom`,
/// `alpha_ij = softmax_{j in N(i) + i} (a . LeakyReLU(z_ij))`,
/// `x'_i = sum_j alpha_ij x_j Theta_bottom`.
///
/// Heads are concatenated along the feature axis.
pub fn gatv2(
    tape: &mut Tape,
    adj: &Adjacency,
    x: Var,
    heads: &[HeadVars],
    negative_slope: f64,
) -> Result<GatV2Output> {
    check_rows("gatv2", tape, adj, x)?;
    let in_dim = tape.value(x).cols();
    let (src, dst) = adj.attention_edges();
    let (src, dst) = (Rc::new(src), Rc::new(dst));
    let mut outputs = Vec::with_capacity(heads.len());
    let mut alphas = Vec::with_capacity(heads.len());
    for head in heads {
        let theta_shape = tape.value(head.theta).shape();
        if theta_shape.0 != 2 * in_dim {
            return Err(Error::ShapeMismatch {
                op: "gatv2 theta",
                left: theta_shape,
                right: (2 * in_dim, theta_shape.1),
            });
        }
        let top = tape.row_slice(head.theta, 0, in_dim)?;
        let bottom = tape.row_slice(head.theta, in_dim, in_dim)?;
        let target_proj = tape.matmul(x, top)?;
        let source_proj = tape.matmul(x, bottom)?;
        let at_target = tape.gather_rows(target_proj, dst.clone())?;
        let at_source = tape.gather_rows(source_proj, src.clone())?;
        let z = tape.add(at_target, at_source)?;
        let activated = tape.leaky_relu(z, negative_slope);
        let scores = tape.matmul(activated, head.attention)?;
        let alpha = tape.group_softmax(scores, dst.clone())?;
        let messages = tape.scale_rows(at_source, alpha)?;
        outputs.push(tape.scatter_add_rows(messages, dst.clone(), adj.num_nodes)?);
        alphas.push(alpha);
    }
    let output = tape.col_concat(&outputs)?;
    Ok(GatV2Output { output, alphas })
}

/// Matrix-level GCN.
pub fn gcn_forward(adj: &Adjacency, x: &Matrix, theta: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let (xv, tv) = (tape.constant(x.clone()), tape.constant(theta.clone()));
    let out = gcn(&mut tape, adj, xv, tv)?;
    Ok(tape.value(out).clone())
}

/// Matrix-level GraphConv.
pub fn graphconv_forward(adj: &Adjacency, x: &Matrix, w1: &Matrix, w2: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let (a, b) = (tape.constant(w1.clone()), tape.constant(w2.clone()));
    let out = graph_conv(&mut tape, adj, xv, a, b)?;
    Ok(tape.value(out).clone())
}

/// Matrix-level GATv2: returns the concatenated output and, per head, the
/// attention coefficient of every `(source, target)` attention edge.
pub fn gatv2_forward(
    adj: &Adjacency,
    x: &Matrix,
    heads: &[(Matrix, Matrix)],
    negative_slope: f64,
) -> Result<(Matrix, Vec<Vec<((usize, usize), f64)>>)> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let head_vars: Vec<HeadVars> = heads
        .iter()
        .map(|(theta, a)| HeadVars {
            theta: tape.constant(theta.clone()),
            attention: tape.constant(a.clone()),
        })
        .collect();
    let out = gatv2(&mut tape, adj, xv, &head_vars, negative_slope)?;
    let (src, dst) = adj.attention_edges();
    let alphas = out
        .alphas
        .iter()
        .map(|&alpha| {
            let values = tape.value(alpha).as_slice();
            src.iter()
                .zip(&dst)
                .zip(values)
                .map(|((&s, &d), &a)| ((s, d), a))
                .collect()
        })
        .collect();
    Ok((tape.value(out.output).clone(), alphas))
}
