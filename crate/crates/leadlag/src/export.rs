//! Network exporters: DOT, GraphML and JSON, with deterministic
//! lexicographic node and edge ordering for diff-stable output.

use std::fmt::Write as _;
use std::path::Path;

use crate::inference::{DirectedNetwork, Edge};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Dot,
    Graphml,
    Json,
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExportFormat::Dot => "dot",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "graphml" => Ok(ExportFormat::Graphml),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::InvalidArgument {
                msg: format!("unknown export format {other:?}"),
            }),
        }
    }
}

fn sorted_view(net: &DirectedNetwork) -> (Vec<&String>, Vec<&Edge>) {
    let mut nodes: Vec<&String> = net.nodes.iter().collect();
    nodes.sort();
    let mut edges: Vec<&Edge> = net.edges.iter().collect();
    edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    (nodes, edges)
}

pub fn to_dot(net: &DirectedNetwork) -> String {
    let (nodes, edges) = sorted_view(net);
    let mut out = String::new();
    writeln!(out, "digraph leadlag {{").unwrap();
    writeln!(
        out,
        "  // lambda={} correction={} p={}",
        net.lambda, net.correction, net.p_nominal
    )
    .unwrap();
    for n in nodes {
        writeln!(out, "  \"{n}\";").unwrap();
    }
    for e in edges {
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [statistic={:.6e}, p_value={:.6e}];",
            e.from, e.to, e.statistic, e.p_value
        )
        .unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

pub fn to_graphml(net: &DirectedNetwork) -> String {
    let (nodes, edges) = sorted_view(net);
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#
    )
    .unwrap();
    writeln!(
        out,
        r#"  <key id="statistic" for="edge" attr.name="statistic" attr.type="double"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"  <key id="p_value" for="edge" attr.name="p_value" attr.type="double"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"  <graph id="leadlag_lambda{}_{}" edgedefault="directed">"#,
        net.lambda, net.correction
    )
    .unwrap();
    for n in nodes {
        writeln!(out, r#"    <node id="{n}"/>"#).unwrap();
    }
    for (i, e) in edges.iter().enumerate() {
        writeln!(
            out,
            r#"    <edge id="e{i}" source="{}" target="{}">"#,
            e.from, e.to
        )
        .unwrap();
        writeln!(out, r#"      <data key="statistic">{:e}</data>"#, e.statistic).unwrap();
        writeln!(out, r#"      <data key="p_value">{:e}</data>"#, e.p_value).unwrap();
        writeln!(out, "    </edge>").unwrap();
    }
    writeln!(out, "  </graph>").unwrap();
    writeln!(out, "</graphml>").unwrap();
    out
}

pub fn to_json(net: &DirectedNetwork) -> String {
    let mut copy = net.clone();
    copy.nodes.sort();
    copy.edges
        .sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    serde_json::to_string_pretty(&copy).expect("network serializes")
}

pub fn from_json(text: &str) -> Result<DirectedNetwork> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn render(net: &DirectedNetwork, format: ExportFormat) -> String {
    match format {
        ExportFormat::Dot => to_dot(net),
        ExportFormat::Graphml => to_graphml(net),
        ExportFormat::Json => to_json(net),
    }
}

pub fn export_network(net: &DirectedNetwork, format: ExportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render(net, format))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Correction;

    fn network(edges: Vec<Edge>) -> DirectedNetwork {
        DirectedNetwork {
            nodes: vec!["B".into(), "A".into()],
            edges,
            correction: Correction::Bonferroni,
            p_nominal: 0.01,
            lambda: 2,
        }
    }

    #[test]
    fn empty_network_exports_nodes_only() {
        let net = network(vec![]);
        let dot = to_dot(&net);
        assert!(dot.contains("\"A\";"));
        assert!(dot.contains("\"B\";"));
        assert!(!dot.contains("->"));
        let gml = to_graphml(&net);
        assert!(gml.contains(r#"<node id="A"/>"#));
        assert!(!gml.contains("<edge"));
    }

    #[test]
    fn single_edge_has_attributes() {
        let net = network(vec![Edge {
            from: "A".into(),
            to: "B".into(),
            statistic: 0.25,
            p_value: 1e-8,
        }]);
        let dot = to_dot(&net);
        assert!(dot.contains("\"A\" -> \"B\""));
        assert!(dot.contains("p_value=1"));
        let gml = to_graphml(&net);
        assert!(gml.contains(r#"source="A" target="B""#));
        assert!(gml.contains(r#"<data key="p_value">1e-8</data>"#));
    }

    #[test]
    fn json_roundtrip_preserves_edges() {
        let net = network(vec![
            Edge {
                from: "B".into(),
                to: "A".into(),
                statistic: 0.1,
                p_value: 1e-7,
            },
            Edge {
                from: "A".into(),
                to: "B".into(),
                statistic: 0.3,
                p_value: 1e-9,
            },
        ]);
        let back = from_json(&to_json(&net)).unwrap();
        assert_eq!(back.edge_set(), net.edge_set());
        assert_eq!(back.edges.len(), net.edges.len());
    }

    #[test]
    fn deterministic_rendering() {
        let mut net = network(vec![
            Edge {
                from: "B".into(),
                to: "A".into(),
                statistic: 0.1,
                p_value: 1e-7,
            },
            Edge {
                from: "A".into(),
                to: "B".into(),
                statistic: 0.3,
                p_value: 1e-9,
            },
        ]);
        let first = (to_dot(&net), to_graphml(&net), to_json(&net));
        net.edges.reverse();
        net.nodes.reverse();
        let second = (to_dot(&net), to_graphml(&net), to_json(&net));
        assert_eq!(first, second);
    }
}
