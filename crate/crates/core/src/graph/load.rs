//! CSV ingestion and export.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::Serialize;

use super::{ChannelRegistry, GraphBuilder, GraphError, NodeId, NodeKind, TemporalMultigraph};

pub const EDGE_HEADER: [&str; 7] = [
    "source",
    "etype",
    "target",
    "time",
    "weight",
    "source_location",
    "target_location",
];

pub const NODE_HEADER: [&str; 3] = ["node", "kind", "label"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum LoadWarning {
    /// A nodes-CSV row without a kind whose node no edge touches.
    DanglingNodeRef { line: usize, node: NodeId },
}

#[derive(Debug)]
pub struct Loaded {
    pub graph: TemporalMultigraph,
    pub warnings: Vec<LoadWarning>,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), GraphError> {
    let mut record = csv::ByteRecord::new();
    let found = if rdr.read_byte_record(&mut record)? {
        let mut fields: Vec<String> = record
            .iter()
            .map(|f| String::from_utf8_lossy(f).into_owned())
            .collect();
        if let Some(first) = fields.first_mut() {
            // tolerate a UTF-8 byte order mark
            *first = first.trim_start_matches('\u{feff}').to_string();
        }
        fields
    } else {
        Vec::new()
    };
    if found.iter().map(String::as_str).eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(GraphError::MissingHeader {
            expected: expected.join(","),
            found: found.join(","),
        })
    }
}

fn field<'r>(
    record: &'r csv::ByteRecord,
    index: usize,
    line: usize,
    column: &str,
) -> Result<&'r str, GraphError> {
    let bytes = record.get(index).ok_or_else(|| GraphError::BadField {
        line,
        column: column.to_string(),
        message: "missing field".into(),
    })?;
    std::str::from_utf8(bytes).map_err(|_| GraphError::BadField {
        line,
        column: column.to_string(),
        message: "not valid UTF-8".into(),
    })
}

fn parse<T: std::str::FromStr>(text: &str, line: usize, column: &str) -> Result<T, GraphError> {
    text.trim().parse().map_err(|_| GraphError::BadField {
        line,
        column: column.to_string(),
        message: format!("cannot parse `{text}`"),
    })
}

fn optional(text: &str) -> Option<&str> {
    let text = text.trim();
    (!text.is_empty()).then_some(text)
}

/// Parses an edges CSV (and optionally a nodes CSV) into a graph.
///
/// Endpoints missing from the nodes CSV get [`NodeKind::Unknown`].
pub fn load_graph<E: Read, N: Read>(
    edges_csv: E,
    nodes_csv: Option<N>,
    registry: &ChannelRegistry,
) -> Result<Loaded, GraphError> {
    let mut builder = GraphBuilder::new(registry.clone());
    let mut referenced = HashSet::new();

    let mut rdr = reader(edges_csv);
    check_header(&mut rdr, &EDGE_HEADER)?;
    let mut record = csv::ByteRecord::new();
    while rdr.read_byte_record(&mut record)? {
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record.get(0).is_some_and(|f| f.is_empty()) {
            continue;
        }
        if record.len() != EDGE_HEADER.len() {
            return Err(GraphError::BadField {
                line,
                column: "*".into(),
                message: format!("expected {} fields, found {}", EDGE_HEADER.len(), record.len()),
            });
        }
        let source = NodeId(parse(field(&record, 0, line, "source")?, line, "source")?);
        let code = field(&record, 1, line, "etype")?.trim();
        let target = NodeId(parse(field(&record, 2, line, "target")?, line, "target")?);
        let time: f64 = parse(field(&record, 3, line, "time")?, line, "time")?;
        if !time.is_finite() || time < 0.0 {
            return Err(GraphError::BadField {
                line,
                column: "time".into(),
                message: "time must be finite and non-negative".into(),
            });
        }
        let weight: f64 = parse(field(&record, 4, line, "weight")?, line, "weight")?;
        if !weight.is_finite() {
            return Err(GraphError::BadField {
                line,
                column: "weight".into(),
                message: "weight must be finite".into(),
            });
        }
        if registry.id(code).is_none() {
            return Err(GraphError::UnknownChannel {
                code: code.to_string(),
                line: Some(line),
            });
        }
        let src_loc = optional(field(&record, 5, line, "source_location")?);
        let dst_loc = optional(field(&record, 6, line, "target_location")?);
        builder.add_located_edge(source, target, code, time, weight, src_loc, dst_loc)?;
        referenced.insert(source);
        referenced.insert(target);
    }

    let mut warnings = Vec::new();
    if let Some(nodes_csv) = nodes_csv {
        let mut rdr = reader(nodes_csv);
        check_header(&mut rdr, &NODE_HEADER)?;
        while rdr.read_byte_record(&mut record)? {
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() == 1 && record.get(0).is_some_and(|f| f.is_empty()) {
                continue;
            }
            let node = NodeId(parse(field(&record, 0, line, "node")?, line, "node")?);
            let kind_text = record
                .get(1)
                .map(|b| String::from_utf8_lossy(b).trim().to_string())
                .unwrap_or_default();
            let kind = if kind_text.is_empty() {
                if !referenced.contains(&node) {
                    warnings.push(LoadWarning::DanglingNodeRef { line, node });
                }
                NodeKind::Unknown
            } else {
                NodeKind::parse(&kind_text).ok_or_else(|| GraphError::BadField {
                    line,
                    column: "kind".into(),
                    message: format!("unknown node kind `{kind_text}`"),
                })?
            };
            let label = match record.get(2) {
                Some(bytes) => optional(std::str::from_utf8(bytes).map_err(|_| GraphError::BadField {
                    line,
                    column: "label".into(),
                    message: "not valid UTF-8".into(),
                })?)
                .map(str::to_string),
                None => None,
            };
            builder.add_node(node, kind, label);
        }
    }

    Ok(Loaded {
        graph: builder.build(),
        warnings,
    })
}

/// Writes every edge in the original edge order.
pub fn write_edges_csv<W: Write>(graph: &TemporalMultigraph, out: W) -> Result<(), GraphError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(EDGE_HEADER)?;
    for edge in graph.edges() {
        let loc = |l: Option<super::LocationId>| l.map(|l| graph.location(l)).unwrap_or("");
        wtr.write_record([
            edge.source.to_string().as_str(),
            graph.channel(edge.channel).as_str(),
            edge.target.to_string().as_str(),
            edge.time.to_string().as_str(),
            edge.weight.to_string().as_str(),
            loc(edge.source_location),
            loc(edge.target_location),
        ])?;
    }
    wtr.flush().map_err(|e| GraphError::Csv(e.to_string()))
}

pub fn write_nodes_csv<W: Write>(graph: &TemporalMultigraph, out: W) -> Result<(), GraphError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(NODE_HEADER)?;
    for node in graph.nodes() {
        wtr.write_record([
            node.id.to_string().as_str(),
            node.kind.as_str(),
            node.label.as_deref().unwrap_or(""),
        ])?;
    }
    wtr.flush().map_err(|e| GraphError::Csv(e.to_string()))
}
