//! Reader and writer for TNTP network and trip-table files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roadnet::{DelayFunction, Edge, RoadError, RoadNetwork};

#[derive(Debug, Error)]
pub enum TntpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("metadata {key} declares {declared} but the file contains {found}")]
    MetadataMismatch {
        key: String,
        declared: String,
        found: String,
    },
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("OD pair ({origin}, {destination}) references a node outside the network")]
    UnknownZone { origin: usize, destination: usize },
}

pub type Result<T> = std::result::Result<T, TntpError>;

/// How the file's columns map onto seconds and vehicles per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TntpUnits {
    /// Seconds per unit of the free-flow time column.
    pub time_unit_seconds: f64,
    /// Length in seconds of the period the capacity column refers to.
    pub capacity_period_seconds: f64,
}

impl TntpUnits {
    /// Columns taken verbatim.
    pub const RAW: TntpUnits = TntpUnits {
        time_unit_seconds: 1.0,
        capacity_period_seconds: 1.0,
    };
}

impl Default for TntpUnits {
    fn default() -> Self {
        TntpUnits {
            time_unit_seconds: 60.0,
            capacity_period_seconds: 7200.0,
        }
    }
}

/// Trip table: `(origin, destination) → rate` in the file's units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OdDemand {
    pub rates: BTreeMap<(usize, usize), f64>,
}

impl OdDemand {
    pub fn total(&self) -> f64 {
        self.rates.values().sum()
    }

    pub fn nonzero_pairs(&self) -> usize {
        self.rates.values().filter(|&&r| r > 0.0).count()
    }

    pub fn scaled(&self, factor: f64) -> OdDemand {
        OdDemand {
            rates: self.rates.iter().map(|(&k, &v)| (k, v * factor)).collect(),
        }
    }

    /// Checks that every origin and destination is a node of `net`.
    pub fn validate_against(&self, net: &RoadNetwork) -> Result<()> {
        for &(origin, destination) in self.rates.keys() {
            let known = |n: usize| n >= 1 && n <= net.node_count();
            if !known(origin) || !known(destination) {
                return Err(TntpError::UnknownZone {
                    origin,
                    destination,
                });
            }
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| TntpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_net(path: &Path, units: TntpUnits) -> Result<RoadNetwork> {
    parse_net(&read_file(path)?, units)
}

pub fn read_trips(path: &Path) -> Result<OdDemand> {
    parse_trips(&read_file(path)?)
}

/// Splits off `<KEY> value` lines up to `<END OF METADATA>`. Returns the
/// metadata and the line index where the body starts. Files without a
/// metadata block are read from the first line.
fn metadata(text: &str) -> (BTreeMap<String, String>, usize) {
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if !t.starts_with('<') {
            return (BTreeMap::new(), 0);
        }
        let Some(close) = t.find('>') else {
            return (BTreeMap::new(), 0);
        };
        let key = t[1..close].trim().to_ascii_uppercase();
        if key == "END OF METADATA" {
            return (meta, i + 1);
        }
        meta.insert(key, t[close + 1..].trim().to_string());
    }
    (meta, text.lines().count())
}

fn declared_count(meta: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    match meta.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| TntpError::Parse {
            line: 0,
            message: format!("metadata {key} is not a count: {v:?}"),
        }),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('~') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn number<T: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token.parse().map_err(|_| TntpError::Parse {
        line,
        message: format!("{what} is not a number: {token:?}"),
    })
}

/// Parses a network file. Columns: init node, term node, capacity, length,
/// free-flow time, B, power, then optional speed, toll and type (ignored).
pub fn parse_net(text: &str, units: TntpUnits) -> Result<RoadNetwork> {
    let (meta, start) = metadata(text);
    let mut edges = Vec::new();
    let mut max_node = 0;
    for (i, raw) in text.lines().enumerate().skip(start) {
        let line = i + 1;
        let body = strip_comment(raw).trim().trim_end_matches(';').trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < 7 {
            return Err(TntpError::Parse {
                line,
                message: format!("expected at least 7 columns, found {}", fields.len()),
            });
        }
        let tail: usize = number(fields[0], line, "init node")?;
        let head: usize = number(fields[1], line, "term node")?;
        let capacity: f64 = number(fields[2], line, "capacity")?;
        let length: f64 = number(fields[3], line, "length")?;
        let fft: f64 = number(fields[4], line, "free flow time")?;
        let alpha: f64 = number(fields[5], line, "B")?;
        let beta: f64 = number(fields[6], line, "power")?;
        let delay = DelayFunction::new(
            fft * units.time_unit_seconds,
            capacity / units.capacity_period_seconds,
            alpha,
            beta,
        )
        .map_err(|e| TntpError::Parse {
            line,
            message: e.to_string(),
        })?;
        max_node = max_node.max(tail).max(head);
        edges.push(Edge {
            id: edges.len(),
            tail,
            head,
            delay,
            length,
        });
    }
    if let Some(links) = declared_count(&meta, "NUMBER OF LINKS")? {
        if links != edges.len() {
            return Err(TntpError::MetadataMismatch {
                key: "NUMBER OF LINKS".into(),
                declared: links.to_string(),
                found: edges.len().to_string(),
            });
        }
    }
    let nodes = match declared_count(&meta, "NUMBER OF NODES")? {
        Some(n) if n < max_node => {
            return Err(TntpError::MetadataMismatch {
                key: "NUMBER OF NODES".into(),
                declared: n.to_string(),
                found: format!("node id {max_node}"),
            })
        }
        Some(n) => n,
        None => max_node,
    };
    Ok(RoadNetwork::new(nodes, edges)?)
}

/// Parses a trip table: `Origin o` headers followed by `d : rate;` entries.
/// Zero entries are kept.
pub fn parse_trips(text: &str) -> Result<OdDemand> {
    let (meta, start) = metadata(text);
    let mut demand = OdDemand::default();
    let mut origin: Option<usize> = None;
    for (i, raw) in text.lines().enumerate().skip(start) {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix("Origin") {
            origin = Some(number(rest.trim(), line, "origin")?);
            continue;
        }
        let Some(o) = origin else {
            return Err(TntpError::Parse {
                line,
                message: "entry before any Origin header".into(),
            });
        };
        for entry in body.split(';') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let Some((d, v)) = entry.split_once(':') else {
                return Err(TntpError::Parse {
                    line,
                    message: format!("expected `destination : rate`, found {entry:?}"),
                });
            };
            let d: usize = number(d.trim(), line, "destination")?;
            let v: f64 = number(v.trim(), line, "rate")?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TntpError::Parse {
                    line,
                    message: format!("rate must be non-negative, found {v}"),
                });
            }
            demand.rates.insert((o, d), v);
        }
    }
    if let Some(total) = meta.get("TOTAL OD FLOW") {
        let declared: f64 = number(total, 0, "TOTAL OD FLOW")?;
        let found = demand.total();
        if (declared - found).abs() > 1e-6 * declared.abs().max(1.0) {
            return Err(TntpError::MetadataMismatch {
                key: "TOTAL OD FLOW".into(),
                declared: total.clone(),
                found: found.to_string(),
            });
        }
    }
    Ok(demand)
}

/// Writes `net` in TNTP network format, converting back to file units.
pub fn write_net(net: &RoadNetwork, units: TntpUnits) -> String {
    let mut out = String::new();
    writeln!(out, "<NUMBER OF NODES> {}", net.node_count()).unwrap();
    writeln!(out, "<NUMBER OF LINKS> {}", net.edge_count()).unwrap();
    writeln!(out, "<END OF METADATA>").unwrap();
    writeln!(out).unwrap();
    writeln!(out, "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\t;").unwrap();
    for e in net.edges() {
        let d = &e.delay;
        writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t;",
            e.tail,
            e.head,
            d.capacity * units.capacity_period_seconds,
            e.length,
            d.t0 / units.time_unit_seconds,
            d.alpha,
            d.beta
        )
        .unwrap();
    }
    out
}

/// Writes `demand` in TNTP trips format.
pub fn write_trips(demand: &OdDemand) -> String {
    let mut out = String::new();
    writeln!(out, "<TOTAL OD FLOW> {}", demand.total()).unwrap();
    writeln!(out, "<END OF METADATA>").unwrap();
    let mut current = None;
    for (&(o, d), &v) in &demand.rates {
        if current != Some(o) {
            writeln!(out, "\nOrigin {o}").unwrap();
            current = Some(o);
        }
        writeln!(out, "  {d} : {v};").unwrap();
    }
    out
}
