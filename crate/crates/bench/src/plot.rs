//! Plot descriptions: which CSV columns to draw, on which scales. Rendering
//! is left to external tooling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::format::PLOT_SCHEMA;
use crate::sweep::RateReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    pub column: String,
    pub scale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    /// Column → required value.
    pub filter: BTreeMap<String, String>,
    pub y_column: String,
    pub mark: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotDoc {
    pub schema: String,
    pub data: String,
    pub plots: Vec<Plot>,
}

fn log_axis(label: &str, column: &str) -> Axis {
    Axis { label: label.into(), column: column.into(), scale: "log".into() }
}

/// One IFO-vs-n panel per family: measured IFO per solver (points) over the
/// certified lower bound (line).
pub fn sweep_plots(report: &RateReport, data: &str) -> PlotDoc {
    let mut by_family: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &report.rows {
        let solvers = by_family.entry(r.family.tag()).or_default();
        if !solvers.contains(&r.solver.as_str()) {
            solvers.push(&r.solver);
        }
    }
    let plots = by_family
        .into_iter()
        .map(|(family, solvers)| {
            let fam = |extra: Option<(&str, &str)>| {
                let mut m = BTreeMap::from([("family".to_string(), family.to_string())]);
                if let Some((k, v)) = extra {
                    m.insert(k.into(), v.into());
                }
                m
            };
            let mut series = vec![Series {
                label: "certified lower bound".into(),
                filter: fam(None),
                y_column: "lower_bound".into(),
                mark: "line".into(),
            }];
            for s in solvers {
                series.push(Series {
                    label: s.into(),
                    filter: fam(Some(("solver", s))).into_iter().chain([("status".into(), "reached".into())]).collect(),
                    y_column: "ifo_to_target".into(),
                    mark: "points".into(),
                });
            }
            Plot { title: format!("{family}: IFO calls to target vs n"), x: log_axis("n", "n"), y: log_axis("IFO calls", "ifo_to_target"), series }
        })
        .collect();
    PlotDoc { schema: PLOT_SCHEMA.into(), data: data.into(), plots }
}
