//! Network predictors: validation, upper-triangle vectorization,
//! standardization, and CSV ingestion.
//!
//! Node indices are 0-based in memory and 1-based in every file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of upper-triangular edges for `v` nodes.
pub fn edge_count(v: usize) -> usize {
    v * v.saturating_sub(1) / 2
}

/// Position of edge `(k, l)`, `k < l`, in the row-wise upper-triangle order
/// `(0,1), (0,2), …, (0,V-1), (1,2), …, (V-2,V-1)`.
pub fn edge_position(v: usize, k: usize, l: usize) -> usize {
    debug_assert!(k < l && l < v);
    k * (2 * v - k - 1) / 2 + (l - k - 1)
}

pub fn edge_pairs(v: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(edge_count(v));
    for k in 0..v {
        for l in (k + 1)..v {
            out.push((k, l));
        }
    }
    out
}

/// One subject's weighted undirected network: symmetric, zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkObservation {
    weights: DMatrix<f64>,
}

impl NetworkObservation {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let v = weights.nrows();
        if weights.ncols() != v {
            return Err(Error::Validation(format!(
                "network must be square, got {}x{}",
                v,
                weights.ncols()
            )));
        }
        for k in 0..v {
            if weights[(k, k)] != 0.0 {
                return Err(Error::Validation(format!(
                    "self-loop at node {} (weight {})",
                    k + 1,
                    weights[(k, k)]
                )));
            }
            for l in (k + 1)..v {
                if weights[(k, l)] != weights[(l, k)] {
                    return Err(Error::Validation(format!(
                        "network not symmetric at ({}, {}): {} vs {}",
                        k + 1,
                        l + 1,
                        weights[(k, l)],
                        weights[(l, k)]
                    )));
                }
                if !weights[(k, l)].is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite weight at ({}, {})",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Rebuilds the symmetric matrix from its upper-triangle vector.
    pub fn from_upper(v: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != edge_count(v) {
            return Err(Error::Validation(format!(
                "expected {} upper-triangular entries for V = {v}, got {}",
                edge_count(v),
                upper.len()
            )));
        }
        let mut weights = DMatrix::zeros(v, v);
        for (e, (k, l)) in edge_pairs(v).into_iter().enumerate() {
            weights[(k, l)] = upper[e];
            weights[(l, k)] = upper[e];
        }
        Self::new(weights)
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn vectorize_upper(&self) -> DVector<f64> {
        let v = self.node_count();
        DVector::from_iterator(
            edge_count(v),
            edge_pairs(v).into_iter().map(|(k, l)| self.weights[(k, l)]),
        )
    }
}

/// Validating form of [`NetworkObservation::vectorize_upper`] for raw matrices.
pub fn vectorize_upper(weights: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(NetworkObservation::new(weights.clone())?.vectorize_upper())
}

/// `trace(B'A)`; equals `2 Σ_{k<l} a_kl b_kl` for symmetric zero-diagonal
/// arguments.
pub fn frobenius_inner(a: &NetworkObservation, b: &DMatrix<f64>) -> Result<f64> {
    let w = a.weights();
    if b.nrows() != w.nrows() || b.ncols() != w.ncols() {
        return Err(Error::Validation(format!(
            "frobenius product of {}x{} and {}x{}",
            w.nrows(),
            w.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(w.component_mul(b).sum())
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub networks: Vec<NetworkObservation>,
    pub responses: Vec<f64>,
    pub subject_ids: Vec<String>,
    pub node_labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(networks: Vec<NetworkObservation>, responses: Vec<f64>) -> Result<Self> {
        let subject_ids = (1..=networks.len()).map(|i| i.to_string()).collect();
        let data = Self {
            networks,
            responses,
            subject_ids,
            node_labels: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.networks.len() != self.responses.len() {
            return Err(Error::Validation(format!(
                "{} networks but {} responses",
                self.networks.len(),
                self.responses.len()
            )));
        }
        if self.subject_ids.len() != self.networks.len() {
            return Err(Error::Validation("subject id count does not match networks".into()));
        }
        if let Some(first) = self.networks.first() {
            let v = first.node_count();
            if let Some((i, net)) = self.networks.iter().enumerate().find(|(_, n)| n.node_count() != v) {
                return Err(Error::Validation(format!(
                    "subject {} has V = {}, expected {v}",
                    self.subject_ids[i],
                    net.node_count()
                )));
            }
            if let Some(labels) = &self.node_labels {
                if labels.len() != v {
                    return Err(Error::Validation(format!("{} node labels for V = {v}", labels.len())));
                }
            }
        }
        if let Some(y) = self.responses.iter().find(|y| !y.is_finite()) {
            return Err(Error::Validation(format!("non-finite response {y}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.networks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }

    pub fn node_count(&self) -> Option<usize> {
        self.networks.first().map(NetworkObservation::node_count)
    }

    /// Subjects at the given positions, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            networks: idx.iter().map(|&i| self.networks[i].clone()).collect(),
            responses: idx.iter().map(|&i| self.responses[i]).collect(),
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            node_labels: self.node_labels.clone(),
        }
    }
}

/// `n × q` design in edge order plus the response.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub v: usize,
    pub edges: Vec<(usize, usize)>,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn q(&self) -> usize {
        self.edges.len()
    }

    /// Same design, no observations; its likelihood term is zero.
    pub fn empty(v: usize) -> Self {
        let q = edge_count(v);
        Self {
            x: DMatrix::zeros(0, q),
            y: DVector::zeros(0),
            v,
            edges: edge_pairs(v),
        }
    }
}

pub fn build_design(data: &Dataset) -> Result<DesignMatrix> {
    data.validate()?;
    let v = data
        .node_count()
        .ok_or_else(|| Error::Validation("dataset has no subjects".into()))?;
    let q = edge_count(v);
    let mut x = DMatrix::zeros(data.len(), q);
    for (i, net) in data.networks.iter().enumerate() {
        x.set_row(i, &net.vectorize_upper().transpose());
    }
    Ok(DesignMatrix {
        x,
        y: DVector::from_column_slice(&data.responses),
        v,
        edges: edge_pairs(v),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub edge_mean: Vec<f64>,
    pub edge_sd: Vec<f64>,
    /// Zero-variance edge columns; these are centered only.
    pub degenerate_edges: Vec<bool>,
    pub response_mean: f64,
    pub response_sd: f64,
    pub degenerate_response: bool,
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl StandardizationStats {
    /// Stats that leave every value unchanged.
    pub fn identity(q: usize) -> Self {
        Self {
            edge_mean: vec![0.0; q],
            edge_sd: vec![1.0; q],
            degenerate_edges: vec![false; q],
            response_mean: 0.0,
            response_sd: 1.0,
            degenerate_response: false,
        }
    }

    fn scale(x: f64, mean: f64, sd: f64, degenerate: bool) -> f64 {
        if degenerate {
            x - mean
        } else {
            (x - mean) / sd
        }
    }

    pub fn apply_network(&self, net: &NetworkObservation) -> Result<NetworkObservation> {
        let raw = net.vectorize_upper();
        if raw.len() != self.edge_mean.len() {
            return Err(Error::Validation(format!(
                "network has {} edges, standardization expects {}",
                raw.len(),
                self.edge_mean.len()
            )));
        }
        let scaled: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(e, &x)| Self::scale(x, self.edge_mean[e], self.edge_sd[e], self.degenerate_edges[e]))
            .collect();
        NetworkObservation::from_upper(net.node_count(), &scaled)
    }

    pub fn apply_response(&self, y: f64) -> f64 {
        Self::scale(y, self.response_mean, self.response_sd, self.degenerate_response)
    }

    pub fn restore_response(&self, y: f64) -> f64 {
        if self.degenerate_response {
            y + self.response_mean
        } else {
            y * self.response_sd + self.response_mean
        }
    }

    /// Factor that maps a standardized-scale edge coefficient back to the
    /// original scale.
    pub fn coefficient_scale(&self, e: usize) -> f64 {
        let edge = if self.degenerate_edges[e] { 1.0 } else { self.edge_sd[e] };
        self.response_scale() / edge
    }

    /// Factor that maps a standardized-scale length back to the original scale.
    pub fn response_scale(&self) -> f64 {
        if self.degenerate_response {
            1.0
        } else {
            self.response_sd
        }
    }
}

/// Centers and scales every edge column and the response (divisor n − 1).
pub fn standardize(data: &Dataset) -> Result<(Dataset, StandardizationStats)> {
    data.validate()?;
    if data.len() < 2 {
        return Err(Error::Validation(format!(
            "standardization needs at least 2 subjects, got {}",
            data.len()
        )));
    }
    let v = data.node_count().expect("nonempty");
    let q = edge_count(v);
    let rows: Vec<DVector<f64>> = data.networks.iter().map(|n| n.vectorize_upper()).collect();
    let mut edge_mean = vec![0.0; q];
    let mut edge_sd = vec![0.0; q];
    let mut degenerate_edges = vec![false; q];
    for e in 0..q {
        let (m, sd) = mean_sd(rows.iter().map(|r| r[e]));
        edge_mean[e] = m;
        edge_sd[e] = sd;
        degenerate_edges[e] = !(sd > 0.0);
    }
    let (response_mean, response_sd) = mean_sd(data.responses.iter().copied());
    let stats = StandardizationStats {
        edge_mean,
        edge_sd,
        degenerate_edges,
        response_mean,
        response_sd,
        degenerate_response: !(response_sd > 0.0),
    };
    let networks = data
        .networks
        .iter()
        .map(|n| stats.apply_network(n))
        .collect::<Result<Vec<_>>>()?;
    let responses = data.responses.iter().map(|&y| stats.apply_response(y)).collect();
    Ok((
        Dataset {
            networks,
            responses,
            subject_ids: data.subject_ids.clone(),
            node_labels: data.node_labels.clone(),
        },
        stats,
    ))
}

// ---------------------------------------------------------------------------
// CSV ingestion

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

pub(crate) fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub(crate) fn check_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Per-subject upper-triangle entries from an edge-list CSV
/// (`subject,row,col,weight`, 1-based). Rows with `row > col` are folded
/// onto `(col, row)`; a pair given twice is an error; absent pairs are 0.
pub struct EdgeList {
    pub subjects: Vec<String>,
    pub entries: HashMap<String, Vec<(usize, usize, f64)>>,
    pub max_node: usize,
}

pub fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["subject", "row", "col", "weight"])?;
    let mut subjects = Vec::new();
    let mut entries: HashMap<String, Vec<(usize, usize, f64)>> = HashMap::new();
    let mut seen: HashSet<(String, usize, usize)> = HashSet::new();
    let mut max_node = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields, found {}", rec.len())));
        }
        let subject = rec[0].to_string();
        let row: usize = rec[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad row index `{}`", &rec[1])))?;
        let col: usize = rec[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad col index `{}`", &rec[2])))?;
        let weight: f64 = rec[3]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad weight `{}`", &rec[3])))?;
        if row == 0 || col == 0 {
            return Err(parse_err(path, line, "node indices are 1-based"));
        }
        if !weight.is_finite() {
            return Err(parse_err(path, line, "non-finite weight"));
        }
        if row == col {
            if weight != 0.0 {
                return Err(parse_err(path, line, format!("self-loop at node {row}")));
            }
            continue;
        }
        let (k, l) = if row < col { (row, col) } else { (col, row) };
        if !seen.insert((subject.clone(), k, l)) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate edge ({k},{l}) for subject {subject}"),
            ));
        }
        max_node = max_node.max(l);
        let list = entries.entry(subject.clone()).or_insert_with(|| {
            subjects.push(subject.clone());
            Vec::new()
        });
        list.push((k - 1, l - 1, weight));
    }
    Ok(EdgeList {
        subjects,
        entries,
        max_node,
    })
}

pub fn read_responses(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["subject", "y"])?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let y: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad response `{}`", &rec[1])))?;
        if !seen.insert(rec[0].to_string()) {
            return Err(parse_err(path, line, format!("duplicate subject {}", &rec[0])));
        }
        out.push((rec[0].to_string(), y));
    }
    Ok(out)
}

fn networks_for(edges: &EdgeList, subjects: &[String], v: usize) -> Result<Vec<NetworkObservation>> {
    subjects
        .iter()
        .map(|s| {
            let mut w = DMatrix::zeros(v, v);
            for &(k, l, x) in edges.entries.get(s).map(Vec::as_slice).unwrap_or(&[]) {
                w[(k, l)] = x;
                w[(l, k)] = x;
            }
            NetworkObservation::new(w)
        })
        .collect()
}

fn resolve_v(edges: &EdgeList, nodes: Option<usize>) -> Result<usize> {
    match nodes {
        Some(v) if v < edges.max_node => Err(Error::Validation(format!(
            "edge list references node {} but V = {v}",
            edges.max_node
        ))),
        Some(v) if v < 2 => Err(Error::Validation(format!("V must be at least 2, got {v}"))),
        Some(v) => Ok(v),
        None if edges.max_node < 2 => Err(Error::Validation("cannot infer V from an empty edge list".into())),
        None => Ok(edges.max_node),
    }
}

/// Loads networks and responses. Subjects follow the response file order;
/// every response subject must appear in the edge list and vice versa.
pub fn load_dataset(edges_path: &Path, responses_path: &Path, nodes: Option<usize>) -> Result<Dataset> {
    let edges = read_edge_list(edges_path)?;
    let responses = read_responses(responses_path)?;
    let v = resolve_v(&edges, nodes)?;
    let known: HashSet<&String> = responses.iter().map(|(s, _)| s).collect();
    if let Some(s) = edges.subjects.iter().find(|s| !known.contains(s)) {
        return Err(Error::Validation(format!(
            "subject {s} in {} has no response in {}",
            edges_path.display(),
            responses_path.display()
        )));
    }
    let listed: HashSet<&String> = edges.subjects.iter().collect();
    if let Some((s, _)) = responses.iter().find(|(s, _)| !listed.contains(s)) {
        return Err(Error::Validation(format!(
            "subject {s} in {} has no edges in {}",
            responses_path.display(),
            edges_path.display()
        )));
    }
    let subjects: Vec<String> = responses.iter().map(|(s, _)| s.clone()).collect();
    let data = Dataset {
        networks: networks_for(&edges, &subjects, v)?,
        responses: responses.iter().map(|(_, y)| *y).collect(),
        subject_ids: subjects,
        node_labels: None,
    };
    data.validate()?;
    Ok(data)
}

/// Networks only (for prediction). Subjects in edge-list order.
pub fn load_networks(edges_path: &Path, nodes: Option<usize>) -> Result<(Vec<String>, Vec<NetworkObservation>)> {
    let edges = read_edge_list(edges_path)?;
    let v = resolve_v(&edges, nodes)?;
    let nets = networks_for(&edges, &edges.subjects, v)?;
    Ok((edges.subjects.clone(), nets))
}

pub fn write_edge_list(path: &Path, subject_ids: &[String], networks: &[NetworkObservation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["subject", "row", "col", "weight"]).map_err(io)?;
    for (s, net) in subject_ids.iter().zip(networks) {
        for (k, l) in edge_pairs(net.node_count()) {
            w.write_record([
                s.clone(),
                (k + 1).to_string(),
                (l + 1).to_string(),
                net.weights()[(k, l)].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_responses(path: &Path, subject_ids: &[String], y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["subject", "y"]).map_err(io)?;
    for (s, v) in subject_ids.iter().zip(y) {
        w.write_record([s.clone(), v.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Responses keyed by subject, for scoring predictions.
pub fn responses_by_subject(path: &Path) -> Result<BTreeMap<String, f64>> {
    Ok(read_responses(path)?.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(v: usize, upper: &[f64]) -> NetworkObservation {
        NetworkObservation::from_upper(v, upper).unwrap()
    }

    #[test]
    fn edge_positions_follow_row_order() {
        let v = 5;
        for (e, (k, l)) in edge_pairs(v).into_iter().enumerate() {
            assert_eq!(edge_position(v, k, l), e);
        }
        assert_eq!(edge_pairs(4).len(), 6);
    }

    #[test]
    fn vectorize_examples() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 3.0;
        w[(1, 0)] = 3.0;
        assert_eq!(vectorize_upper(&w).unwrap().as_slice(), &[3.0]);

        let net = sym(3, &[1.0, 2.0, 3.0]);
        assert_eq!(net.weights()[(0, 2)], 2.0);
        assert_eq!(net.vectorize_upper().as_slice(), &[1.0, 2.0, 3.0]);

        assert_eq!(vectorize_upper(&DMatrix::zeros(4, 4)).unwrap(), DVector::zeros(6));
    }

    #[test]
    fn invalid_networks_rejected() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        assert!(matches!(vectorize_upper(&w), Err(Error::Validation(_))));
        let mut w = DMatrix::zeros(3, 3);
        w[(1, 1)] = 1.0;
        assert!(matches!(vectorize_upper(&w), Err(Error::Validation(_))));
    }

    #[test]
    fn frobenius_examples() {
        let a = sym(2, &[3.0]);
        let b = sym(2, &[2.0]);
        assert_eq!(frobenius_inner(&a, b.weights()).unwrap(), 12.0);
        let zero = sym(3, &[0.0; 3]);
        assert_eq!(
            frobenius_inner(&zero, sym(3, &[1.0, -2.0, 5.0]).weights()).unwrap(),
            0.0
        );
        assert!(frobenius_inner(&a, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn design_rows_match_vectorization() {
        let nets = vec![sym(3, &[1.0, 2.0, 3.0]), sym(3, &[-1.0, 0.5, 4.0])];
        let data = Dataset::new(nets.clone(), vec![1.0, 2.0]).unwrap();
        let d = build_design(&data).unwrap();
        assert_eq!((d.n(), d.q()), (2, 3));
        for i in 0..2 {
            assert_eq!(d.x.row(i).transpose(), nets[i].vectorize_upper());
        }
        let one = build_design(&Dataset::new(vec![sym(2, &[5.0])], vec![0.0]).unwrap()).unwrap();
        assert_eq!(one.x.shape(), (1, 1));
    }

    #[test]
    fn mixed_node_counts_rejected() {
        let err = Dataset::new(vec![sym(3, &[1.0, 2.0, 3.0]), sym(2, &[1.0])], vec![0.0, 1.0]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn standardize_two_point_response() {
        let data = Dataset::new(vec![sym(2, &[1.0]), sym(2, &[2.0])], vec![1.0, 3.0]).unwrap();
        let (s, stats) = standardize(&data).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.responses[0] + h).abs() < 1e-12);
        assert!((s.responses[1] - h).abs() < 1e-12);
        assert!((stats.restore_response(s.responses[1]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_flags_constant_columns() {
        let data = Dataset::new(
            vec![
                sym(3, &[1.0, 7.0, 0.0]),
                sym(3, &[2.0, 7.0, 1.0]),
                sym(3, &[4.0, 7.0, 5.0]),
            ],
            vec![1.0, 2.0, 4.0],
        )
        .unwrap();
        let (s, stats) = standardize(&data).unwrap();
        assert_eq!(stats.degenerate_edges, vec![false, true, false]);
        for net in &s.networks {
            assert_eq!(net.vectorize_upper()[1], 0.0);
        }
        assert!(standardize(&data.subset(&[0])).is_err());
    }

    #[test]
    fn standardize_is_idempotent() {
        let data = Dataset::new(
            vec![
                sym(3, &[1.0, 2.0, 0.3]),
                sym(3, &[2.5, -1.0, 1.0]),
                sym(3, &[4.0, 0.1, 5.0]),
                sym(3, &[0.2, 0.2, 0.2]),
            ],
            vec![1.0, 2.0, 4.0, -3.0],
        )
        .unwrap();
        let (once, _) = standardize(&data).unwrap();
        let (twice, _) = standardize(&once).unwrap();
        for (a, b) in once.networks.iter().zip(&twice.networks) {
            assert!((a.weights() - b.weights()).amax() < 1e-12);
        }
        for (a, b) in once.responses.iter().zip(&twice.responses) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(once.subject_ids, twice.subject_ids);
    }

    proptest! {
        #[test]
        fn upper_round_trip(v in 2usize..7, seed in proptest::collection::vec(-5.0f64..5.0, 21)) {
            let upper = &seed[..edge_count(v)];
            let net = sym(v, upper);
            let vec = net.vectorize_upper();
            prop_assert_eq!(vec.as_slice(), upper);
            prop_assert_eq!(NetworkObservation::from_upper(v, net.vectorize_upper().as_slice()).unwrap(), net);
        }

        #[test]
        fn frobenius_is_twice_upper_dot(v in 2usize..7,
                                        a in proptest::collection::vec(-5.0f64..5.0, 21),
                                        b in proptest::collection::vec(-5.0f64..5.0, 21)) {
            let q = edge_count(v);
            let na = sym(v, &a[..q]);
            let nb = sym(v, &b[..q]);
            let direct = (nb.weights().transpose() * na.weights()).trace();
            let via = na.vectorize_upper().dot(&(nb.vectorize_upper() * 2.0));
            let f = frobenius_inner(&na, nb.weights()).unwrap();
            prop_assert!((f - direct).abs() < 1e-9);
            prop_assert!((f - via).abs() < 1e-9);
        }
    }
}
