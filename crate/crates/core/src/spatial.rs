//! Cross-cell correlation graph and neighbour-based input augmentation.

use std::collections::BTreeMap;
use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataprep::KpiSeries;
use crate::error::{Error, Result};
use crate::neuralnet::Tensor2;

/// Pairwise `|pearson|` between cells on one channel. The diagonal is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGraph {
    pub cells: Vec<String>,
    pub weights: Tensor2,
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Builds the graph from rows `range` of `channel` in every series.
pub fn build_graph(series: &[KpiSeries], channel: usize, range: Range<usize>) -> Result<CorrelationGraph> {
    let cols: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            if channel >= s.n_channels() || range.end > s.len() {
                return Err(Error::InvalidInput(format!(
                    "cell {}: rows {range:?} of channel {channel} unavailable",
                    s.cell_id
                )));
            }
            Ok(range.clone().map(|t| s.values.get(t, channel)).collect())
        })
        .collect::<Result<_>>()?;
    let n = series.len();
    let mut w = Tensor2::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let r = pearson(&cols[i], &cols[j]).abs();
            w.set(i, j, r);
            w.set(j, i, r);
        }
    }
    Ok(CorrelationGraph {
        cells: series.iter().map(|s| s.cell_id.clone()).collect(),
        weights: w,
    })
}

/// The `k` most correlated other cells, strongest first; ties go to the
/// lexicographically smaller id. Returns fewer than `k` when the graph is small.
pub fn topk_neighbors(graph: &CorrelationGraph, cell: &str, k: usize) -> Result<Vec<String>> {
    let i = graph
        .cells
        .iter()
        .position(|c| c == cell)
        .ok_or_else(|| Error::UnknownCell(cell.to_string()))?;
    let mut others: Vec<(f64, &String)> = graph
        .cells
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, c)| (graph.weights.get(i, j), c))
        .collect();
    others.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    if others.len() < k {
        warn!("cell {cell}: only {} neighbours available, {k} requested", others.len());
    }
    Ok(others.into_iter().take(k).map(|(_, c)| c.clone()).collect())
}

/// Appends every channel of each neighbour to `cell`. Neighbour channels are
/// named `"{channel}@{neighbour}"`.
pub fn augment_inputs(cell: &KpiSeries, neighbors: &[&KpiSeries]) -> Result<KpiSeries> {
    for nb in neighbors {
        if nb.len() != cell.len() || nb.start_ts != cell.start_ts || nb.step_seconds != cell.step_seconds {
            return Err(Error::InvalidInput(format!(
                "neighbour {} is not aligned with cell {}",
                nb.cell_id, cell.cell_id
            )));
        }
    }
    let mut channels = cell.channels.clone();
    for nb in neighbors {
        channels.extend(nb.channels.iter().map(|c| format!("{c}@{}", nb.cell_id)));
    }
    let width = channels.len();
    let mut data = Vec::with_capacity(cell.len() * width);
    for t in 0..cell.len() {
        data.extend_from_slice(cell.values.row(t));
        for nb in neighbors {
            data.extend_from_slice(nb.values.row(t));
        }
    }
    let mut out = cell.clone();
    out.values = Tensor2::from_vec(cell.len(), width, data)?;
    out.channels = channels;
    out.missing = vec![false; cell.len() * width];
    Ok(out)
}

/// `{"cell": {"neighbor": weight, …}, …}` with the `k` strongest edges per cell.
pub fn graph_to_json(graph: &CorrelationGraph, k: usize) -> Result<serde_json::Value> {
    let mut out = BTreeMap::new();
    for (i, c) in graph.cells.iter().enumerate() {
        let mut edges = serde_json::Map::new();
        for nb in topk_neighbors(graph, c, k)? {
            let j = graph.cells.iter().position(|x| *x == nb).expect("graph node");
            edges.insert(nb, graph.weights.get(i, j).into());
        }
        out.insert(c.clone(), serde_json::Value::Object(edges));
    }
    Ok(serde_json::to_value(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, f: impl Fn(usize) -> f64) -> KpiSeries {
        let rows: Vec<Vec<f64>> = (0..50).map(|t| vec![f(t)]).collect();
        KpiSeries::from_rows(id, 0, 60, vec!["load".into()], &rows).unwrap()
    }

    #[test]
    fn pearson_known_values() {
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = a.iter().map(|x| -2.0 * x + 1.0).collect();
        assert!((pearson(&a, &a) - 1.0).abs() < 1e-12);
        assert!((pearson(&a, &b) + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&a, &[3.0; 10]), 0.0);
    }

    #[test]
    fn topk_orders_by_strength_then_id() {
        let s = vec![
            series("a", |t| (t as f64 * 0.3).sin()),
            series("c", |t| (t as f64 * 0.3).sin() * 2.0),
            series("b", |t| (t as f64 * 0.3).sin() + 1.0),
            series("d", |t| ((t * 7919) % 13) as f64),
        ];
        let g = build_graph(&s, 0, 0..50).unwrap();
        assert_eq!(topk_neighbors(&g, "a", 2).unwrap(), vec!["b", "c"]);
        assert_eq!(topk_neighbors(&g, "a", 5).unwrap().len(), 3);
        assert!(topk_neighbors(&g, "zz", 1).is_err());
        let j = graph_to_json(&g, 1).unwrap();
        assert!(j["a"]["b"].as_f64().unwrap() > 0.999);
    }

    #[test]
    fn augmentation_appends_neighbour_channels() {
        let a = series("a", |t| t as f64);
        let b = series("b", |t| 2.0 * t as f64);
        let out = augment_inputs(&a, &[&b]).unwrap();
        assert_eq!(out.channels, vec!["load", "load@b"]);
        assert_eq!(out.values.row(3), &[3.0, 6.0]);
    }
}
