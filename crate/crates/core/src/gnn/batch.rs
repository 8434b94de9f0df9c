use std::rc::Rc;

use super::conv::Adjacency;
use crate::autodiff::{Matrix, Segments};
use crate::embedding::{Embeddings, MlnFeatures};
use crate::error::{Error, Result};
use crate::mln::TweetMln;

/// One featurized network, ready to be batched.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub features: MlnFeatures,
    pub adjacency: [Adjacency; 3],
    pub label: usize,
}

impl GraphSample {
    pub fn new(mln: &TweetMln, embeddings: &Embeddings) -> Self {
        GraphSample {
            features: embeddings.featurize(mln),
            adjacency: [0, 1, 2].map(|i| Adjacency::from_layer(&mln.layers[i])),
            label: mln.label.index(),
        }
    }

    /// Same graph with nodes of every layer relabelled: new node `k` of
    /// layer `l` is old node `perms[l][k]`.
    pub fn permuted(&self, perms: &[Vec<usize>; 3]) -> Result<Self> {
        let mut out = self.clone();
        for l in 0..3 {
            let perm = &perms[l];
            let n = self.adjacency[l].num_nodes;
            let mut inverse = vec![usize::MAX; n];
            for (new, &old) in perm.iter().enumerate() {
                if old >= n || inverse[old] != usize::MAX {
                    return Err(Error::InvalidConfig("not a permutation".into()));
                }
                inverse[old] = new;
            }
            if perm.len() != n {
                return Err(Error::InvalidConfig("not a permutation".into()));
            }
            let src = &self.features.layers[l];
            out.features.layers[l] = Matrix::from_fn(n, src.cols(), |r, c| src[(perm[r], c)]);
            let adj = &self.adjacency[l];
            let edges = adj
                .edges
                .iter()
                .map(|&(u, v)| {
                    let (a, b) = (inverse[u], inverse[v]);
                    if adj.directed {
                        (a, b)
                    } else {
                        (a.min(b), a.max(b))
                    }
                })
                .collect();
            out.adjacency[l] = Adjacency::new(n, edges, adj.directed)?;
        }
        Ok(out)
    }
}

/// One layer of a batch: the block-diagonal union of that layer across
/// every graph in the batch.
#[derive(Debug, Clone)]
pub struct LayerBatch {
    pub features: Matrix,
    pub adjacency: Adjacency,
    /// Node to graph assignment.
    pub segments: Rc<Segments>,
}

#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub layers: [LayerBatch; 3],
    pub labels: Vec<usize>,
}

impl GraphBatch {
    pub fn new(samples: &[&GraphSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        let layer = |l: usize| -> Result<LayerBatch> {
            let dim = samples[0].features.layers[l].cols();
            let directed = samples[0].adjacency[l].directed;
            let mut data = Vec::new();
            let mut edges = Vec::new();
            let mut ids = Vec::new();
            let mut offset = 0;
            for (g, sample) in samples.iter().enumerate() {
                let features = &sample.features.layers[l];
                let adj = &sample.adjacency[l];
                if features.cols() != dim || features.rows() != adj.num_nodes {
                    return Err(Error::ShapeMismatch {
                        op: "GraphBatch::new",
                        left: features.shape(),
                        right: (adj.num_nodes, dim),
                    });
                }
                data.extend_from_slice(features.as_slice());
                edges.extend(adj.edges.iter().map(|&(u, v)| (u + offset, v + offset)));
                ids.extend(std::iter::repeat(g).take(adj.num_nodes));
                offset += adj.num_nodes;
            }
            Ok(LayerBatch {
                features: Matrix::new(offset, dim, data)?,
                adjacency: Adjacency::new(offset, edges, directed)?,
                segments: Rc::new(Segments::new(ids, samples.len())?),
            })
        };
        Ok(GraphBatch {
            layers: [layer(0)?, layer(1)?, layer(2)?],
            labels: samples.iter().map(|s| s.label).collect(),
        })
    }

    pub fn single(sample: &GraphSample) -> Result<Self> {
        Self::new(&[sample])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(nodes: usize, edges: Vec<(usize, usize)>, label: usize) -> GraphSample {
        let layer = |directed| Adjacency::new(nodes, edges.clone(), directed).unwrap();
        GraphSample {
            features: MlnFeatures {
                layers: [0, 1, 2].map(|l| Matrix::from_fn(nodes, 2, |r, c| (l * 100 + r * 10 + c) as f64)),
            },
            adjacency: [layer(false), layer(true), layer(false)],
            label,
        }
    }

    #[test]
    fn block_diagonal_offsets() {
        let a = sample(3, vec![(0, 1), (1, 2)], 0);
        let b = sample(4, vec![(0, 3)], 5);
        let batch = GraphBatch::new(&[&a, &b]).unwrap();
        let l = &batch.layers[1];
        assert_eq!(l.features.rows(), 7);
        assert_eq!(l.segments.ids(), [0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(l.adjacency.edges, [(0, 1), (1, 2), (3, 6)]);
        assert!(l.adjacency.directed);
        assert_eq!(l.features.row(3), b.features.layers[1].row(0));
        assert_eq!(batch.labels, [0, 5]);
    }

    #[test]
    fn single_batch_has_no_offset() {
        let a = sample(3, vec![(0, 2)], 1);
        let batch = GraphBatch::single(&a).unwrap();
        assert_eq!(batch.layers[0].adjacency.edges, [(0, 2)]);
        assert_eq!(batch.layers[0].segments.count(), 1);
        assert!(GraphBatch::new(&[]).is_err());
    }

    #[test]
    fn permutation_moves_rows_and_edges() {
        let a = sample(3, vec![(0, 1)], 0);
        let perm = [vec![2, 0, 1], vec![2, 0, 1], vec![0, 1, 2]];
        let p = a.permuted(&perm).unwrap();
        assert_eq!(p.features.layers[0].row(0), a.features.layers[0].row(2));
        // Old edge 0 -> 1 becomes 1 -> 2.
        assert_eq!(p.adjacency[1].edges, [(1, 2)]);
        assert_eq!(p.adjacency[0].edges, [(1, 2)]);
        assert!(a.permuted(&[vec![0, 0, 1], vec![0, 1, 2], vec![0, 1, 2]]).is_err());
    }
}
