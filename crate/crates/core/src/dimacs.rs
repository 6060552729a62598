//! DIMACS max-flow format.
//!
//! ```text
//! c comment
//! p max <n> <m>
//! n <id> s
//! n <id> t
//! a <tail> <head> <capacity>
//! ```
//!
//! Vertex ids are 1-based. An arc of integer capacity `k` becomes `k`
//! parallel unit arcs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FlowError, Result};
use crate::graph::{ArcTag, DirectedMultigraph};

/// Cap on the number of unit arcs after capacity expansion.
pub const MAX_EXPANDED_ARCS: u64 = 10_000_000;

fn parse_err(line: usize, msg: impl Into<String>) -> FlowError {
    FlowError::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

pub fn parse_dimacs(text: &str) -> Result<DirectedMultigraph> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut source: Option<usize> = None;
    let mut sink: Option<usize> = None;
    let mut arcs: Vec<(usize, usize, u64, usize)> = Vec::new();
    let mut expanded: u64 = 0;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let mut toks = raw.split_whitespace();
        let Some(kind) = toks.next() else { continue };
        match kind {
            "c" => continue,
            "p" => {
                if header.is_some() {
                    return Err(parse_err(line, "duplicate problem line"));
                }
                let fmt: String = field(toks.next(), line, "problem type")?;
                if fmt != "max" {
                    return Err(parse_err(
                        line,
                        format!("expected problem type max, got {fmt:?}"),
                    ));
                }
                let n: usize = field(toks.next(), line, "vertex count")?;
                let m: usize = field(toks.next(), line, "arc count")?;
                if n < 2 {
                    return Err(parse_err(line, "need at least two vertices"));
                }
                header = Some((n, m, line));
            }
            "n" => {
                let (n, _, _) =
                    header.ok_or_else(|| parse_err(line, "node line before problem line"))?;
                let id: usize = field(toks.next(), line, "node id")?;
                if id == 0 || id > n {
                    return Err(parse_err(
                        line,
                        format!("node id {id} out of range 1..={n}"),
                    ));
                }
                let slot = match toks.next() {
                    Some("s") => &mut source,
                    Some("t") => &mut sink,
                    other => {
                        return Err(parse_err(line, format!("expected s or t, got {other:?}")))
                    }
                };
                if slot.is_some() {
                    return Err(parse_err(line, "terminal designated twice"));
                }
                *slot = Some(id - 1);
            }
            "a" => {
                let (n, _, _) =
                    header.ok_or_else(|| parse_err(line, "arc line before problem line"))?;
                let u: usize = field(toks.next(), line, "arc tail")?;
                let v: usize = field(toks.next(), line, "arc head")?;
                let cap: u64 = field(toks.next(), line, "capacity")?;
                if u == 0 || u > n || v == 0 || v > n {
                    return Err(parse_err(
                        line,
                        format!("arc ({u}, {v}) out of range 1..={n}"),
                    ));
                }
                if cap == 0 {
                    return Err(parse_err(line, "capacity must be positive"));
                }
                expanded = expanded.saturating_add(cap);
                if expanded > MAX_EXPANDED_ARCS {
                    return Err(parse_err(
                        line,
                        format!("capacity expansion exceeds {MAX_EXPANDED_ARCS} unit arcs"),
                    ));
                }
                arcs.push((u - 1, v - 1, cap, line));
            }
            other => return Err(parse_err(line, format!("unknown line type {other:?}"))),
        }
        if toks.next().is_some() {
            return Err(parse_err(line, "trailing tokens"));
        }
    }

    let (n, m, p_line) = header.ok_or_else(|| parse_err(last_line, "missing problem line"))?;
    if arcs.len() != m {
        return Err(parse_err(
            p_line,
            format!("problem line declares {m} arcs, found {}", arcs.len()),
        ));
    }
    let s = source.ok_or_else(|| parse_err(last_line, "missing source designation"))?;
    let t = sink.ok_or_else(|| parse_err(last_line, "missing sink designation"))?;
    if s == t {
        return Err(parse_err(last_line, "source equals sink"));
    }
    let mut g = DirectedMultigraph::new(n, s, t)?;
    for (u, v, cap, _) in arcs {
        for _ in 0..cap {
            g.add_arc(u, v)?;
        }
    }
    Ok(g)
}

pub fn read_dimacs(path: impl AsRef<Path>) -> Result<DirectedMultigraph> {
    parse_dimacs(&std::fs::read_to_string(path)?)
}

/// Writes the live original arcs, merging parallel arcs into capacities.
pub fn write_dimacs(g: &DirectedMultigraph) -> String {
    let mut pairs: Vec<(usize, usize)> = g
        .arcs()
        .filter(|(_, a)| a.tag == ArcTag::Original)
        .map(|(_, a)| (a.tail, a.head))
        .collect();
    pairs.sort_unstable();
    let mut merged: Vec<((usize, usize), u64)> = Vec::new();
    for p in pairs {
        match merged.last_mut() {
            Some((q, c)) if *q == p => *c += 1,
            _ => merged.push((p, 1)),
        }
    }
    let mut out = String::new();
    writeln!(out, "p max {} {}", g.n(), merged.len()).unwrap();
    writeln!(out, "n {} s", g.s() + 1).unwrap();
    writeln!(out, "n {} t", g.t() + 1).unwrap();
    for ((u, v), c) in merged {
        writeln!(out, "a {} {} {c}", u + 1, v + 1).unwrap();
    }
    out
}

pub fn write_dimacs_file(g: &DirectedMultigraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_dimacs(g))?;
    Ok(())
}
