//! Per-position, per-group hidden vectors labelled by the automaton
//! transition of the span each vector can see.

use std::collections::HashMap;
use std::io::Write;

use super::kmeans::{kmeans, purity, DEFAULT_RESTARTS};
use super::pca::{pca_2d, Pca2};
use crate::autodiff::Tape;
use crate::automata::{TaskSpec, TransitionMatrix};
use crate::error::{Error, Result};
use crate::model::{mask::dilation, Arch, AttentionRoute, Model};
use crate::tensor::Float;

/// Which vector is recorded at the end of each depth group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Representation {
    /// Output of the last FFN in the group, before the residual add.
    #[default]
    FfnOutput,
    /// Residual stream after the group.
    Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub position: usize,
    pub group: usize,
    pub vector: Vec<f64>,
    /// Index into `LayerOutputDump::labels`.
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutputDump {
    pub chunk: usize,
    pub depth: usize,
    pub records: Vec<OutputRecord>,
    /// Distinct span transitions in order of first appearance.
    pub labels: Vec<TransitionMatrix>,
}

impl LayerOutputDump {
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }
}

/// First position of the span visible to position `i` after group `l`:
/// `max(0, i - C^{l+1} + 1)`.
pub fn span_start(i: usize, chunk: usize, group: usize) -> usize {
    let width = dilation(chunk, group + 1);
    (i + 1).saturating_sub(width)
}

pub fn collect_outputs<F: Float>(
    model: &Model<F>,
    task: &TaskSpec,
    tokens: &[usize],
    repr: Representation,
) -> Result<LayerOutputDump> {
    if model.config().arch != Arch::Regular {
        return Err(Error::invalid("collect_outputs", "span labels are defined for the dilated model only"));
    }
    let chunk = model.config().chunk_size;
    let offset = usize::from(model.config().bos);
    let mut tape = Tape::new();
    let trace = model.forward_tape(&mut tape, &[tokens], AttentionRoute::Sparse)?;
    let bucket = &trace.buckets[0];
    let vars = match repr {
        Representation::FfnOutput => &bucket.ffn_outputs,
        Representation::Residual => &bucket.group_outputs,
    };
    let mut labels: Vec<TransitionMatrix> = Vec::new();
    let mut index: HashMap<TransitionMatrix, usize> = HashMap::new();
    let mut records = Vec::with_capacity(tokens.len() * vars.len());
    for (group, &var) in vars.iter().enumerate() {
        let values = tape.value(var);
        for i in 0..tokens.len() {
            // Spans are computed in model positions; the start token carries
            // no transition.
            let start = span_start(i + offset, chunk, group).max(offset) - offset;
            let span = &tokens[start..=i];
            let m = task.automaton.transition_matrix(span)?;
            let label = *index.entry(m.clone()).or_insert_with(|| {
                labels.push(m);
                labels.len() - 1
            });
            records.push(OutputRecord {
                position: i,
                group,
                vector: values.row(i + offset).iter().map(|x| x.f64()).collect(),
                label,
            });
        }
    }
    Ok(LayerOutputDump {
        chunk,
        depth: vars.len(),
        records,
        labels,
    })
}

#[derive(Debug, Clone)]
pub struct ClusterReport {
    pub k: usize,
    pub purity: f64,
    pub pca: Pca2,
    pub assignments: Vec<usize>,
}

impl ClusterReport {
    /// `i,l,pc1,pc2,label`, label written as the transition map (`1-0`).
    pub fn write_csv(&self, dump: &LayerOutputDump, out: &mut impl Write) -> Result<()> {
        writeln!(out, "i,l,pc1,pc2,label")?;
        for (r, p) in dump.records.iter().zip(&self.pca.projections) {
            let label: Vec<String> = dump.labels[r.label].as_map().iter().map(|q| q.to_string()).collect();
            writeln!(out, "{},{},{},{},{}", r.position, r.group, p[0], p[1], label.join("-"))?;
        }
        Ok(())
    }
}

/// PCA to two dimensions, k-means with `k` clusters (20 restarts), purity
/// against the oracle span labels.
pub fn cluster_purity(dump: &LayerOutputDump, k: usize, seed: u64) -> Result<ClusterReport> {
    if k > dump.records.len() {
        return Err(Error::invalid(
            "cluster_purity",
            format!("k = {k} exceeds {} records", dump.records.len()),
        ));
    }
    let vectors: Vec<Vec<f64>> = dump.records.iter().map(|r| r.vector.clone()).collect();
    let pca = pca_2d(&vectors)?;
    let points: Vec<Vec<f64>> = pca.projections.iter().map(|p| p.to_vec()).collect();
    let km = kmeans(&points, k, DEFAULT_RESTARTS, seed)?;
    let labels: Vec<usize> = dump.records.iter().map(|r| r.label).collect();
    Ok(ClusterReport {
        k,
        purity: purity(&km.assignments, &labels),
        pca,
        assignments: km.assignments,
    })
}
