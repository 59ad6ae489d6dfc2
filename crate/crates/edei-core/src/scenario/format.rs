//! Text serialization of [`ScenarioConfig`]: a strict line-oriented schema
//! with a version header and a fixed canonical field order.
//!
//! The serializer emits exactly one canonical form, and the parser accepts
//! only that form, so `load(save(c)) == c` and re-saving a loaded file is
//! byte-identical. Floats print through `Display`, which round-trips f64.

use std::path::Path;

use crate::graph::AssetCategory;
use crate::scenario::{NodeSpec, ScenarioConfig, ScenarioError};

pub const FORMAT_HEADER: &str = "edei-scenario/1";

/// Serializes to the canonical text form.
pub fn save(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let push_line = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push_line(&mut out, FORMAT_HEADER.to_string());
    push_line(&mut out, format!("name = {}", cfg.name));
    push_line(&mut out, format!("grid = {} {}", cfg.grid.0, cfg.grid.1));
    push_line(&mut out, format!("t_max = {}", cfg.t_max));
    push_line(&mut out, format!("tau = {}", cfg.tau));
    push_line(&mut out, format!("beta = {}", cfg.beta));
    push_line(&mut out, format!("f_seed = {}", cfg.f_seed));
    push_line(&mut out, format!("sense_radius = {}", cfg.sense_radius));
    push_line(&mut out, format!("suppression = {}", cfg.suppression));
    push_line(&mut out, format!("ct_assign = {}", cfg.ct_assign));
    push_line(&mut out, format!("delta_t = {}", cfg.delta_t));
    push_line(&mut out, format!("k_line = {}", cfg.k_line));
    push_line(&mut out, format!("n_checked = {}", cfg.n_checked));
    push_line(&mut out, format!("agents ={}", join_ids(&cfg.agent_start)));
    push_line(&mut out, format!("incidents ={}", join_ids(&cfg.initial_incidents)));
    for (i, n) in cfg.nodes.iter().enumerate() {
        push_line(
            &mut out,
            format!("node = {} {} {} {} {}", i, n.x, n.y, n.assets, n.category.name()),
        );
    }
    for &(a, b, len) in &cfg.edges {
        push_line(&mut out, format!("edge = {a} {b} {len}"));
    }
    for &(a, b, rate) in &cfg.spread_edges {
        push_line(&mut out, format!("spread = {a} {b} {rate}"));
    }
    for &(node, deadline, value) in &cfg.assignments {
        push_line(&mut out, format!("assignment = {node} {deadline} {value}"));
    }
    out
}

fn join_ids(ids: &[u32]) -> String {
    let mut s = String::new();
    for id in ids {
        s.push(' ');
        s.push_str(&id.to_string());
    }
    s
}

struct Parser<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> ScenarioError {
        ScenarioError::Parse { line: self.pos + 1, msg: msg.into() }
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next_line(&mut self) -> Result<&'a str, ScenarioError> {
        match self.lines.get(self.pos) {
            Some(line) => Ok(line),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn advance(&mut self) {
        self.pos += 1;
    }

    /// Consumes `key = value` for an exact key, returning the value text.
    fn key_value(&mut self, key: &str) -> Result<&'a str, ScenarioError> {
        let line = self.next_line()?;
        let (found, value) = split_kv(line).ok_or_else(|| {
            self.err(format!("expected `{key} = ...`, found {line:?}"))
        })?;
        if found != key {
            return Err(self.err(format!("expected key {key}, found {found}")));
        }
        self.advance();
        Ok(value)
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ScenarioError> {
        let raw = self.key_value(key)?;
        raw.trim()
            .parse::<T>()
            .map_err(|_| ScenarioError::Parse {
                line: self.pos,
                msg: format!("cannot parse value {raw:?} for key {key}"),
            })
    }

    fn id_list(&mut self, key: &str) -> Result<Vec<u32>, ScenarioError> {
        let raw = self.key_value(key)?;
        let line = self.pos;
        raw.split_whitespace()
            .map(|tok| {
                tok.parse::<u32>().map_err(|_| ScenarioError::Parse {
                    line,
                    msg: format!("bad id {tok:?} in {key} list"),
                })
            })
            .collect()
    }

    /// Consumes all consecutive `key = ...` rows for one repeated section.
    fn section<T>(
        &mut self,
        key: &str,
        mut parse: impl FnMut(&mut Self, &'a str) -> Result<T, ScenarioError>,
    ) -> Result<Vec<T>, ScenarioError> {
        let mut rows = Vec::new();
        while let Some(line) = self.peek() {
            match split_kv(line) {
                Some((found, value)) if found == key => {
                    rows.push(parse(self, value)?);
                    self.advance();
                }
                _ => break,
            }
        }
        Ok(rows)
    }

    fn fields<const N: usize>(&self, value: &'a str, what: &str) -> Result<[&'a str; N], ScenarioError> {
        let parts: Vec<&str> = value.split_whitespace().collect();
        parts.try_into().map_err(|_| self.err(format!("{what} needs exactly {N} fields")))
    }
}

/// Splits `key = value`; the value may be empty (`key =`).
fn split_kv(line: &str) -> Option<(&str, &str)> {
    let (key, value) = line.split_once('=')?;
    let key = key.trim();
    if key.is_empty() || key.contains(char::is_whitespace) {
        return None;
    }
    Some((key, value.trim()))
}

fn parse_num<T: std::str::FromStr>(p: &Parser, tok: &str, what: &str) -> Result<T, ScenarioError> {
    tok.parse::<T>().map_err(|_| p.err(format!("bad {what} {tok:?}")))
}

/// Parses the canonical text form and validates the result.
pub fn load(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let mut p = Parser { lines, pos: 0 };

    let header = p.next_line()?;
    if header != FORMAT_HEADER {
        return Err(p.err(format!("expected header {FORMAT_HEADER:?}, found {header:?}")));
    }
    p.advance();

    let name = p.key_value("name")?.to_string();
    let grid_raw = p.key_value("grid")?;
    let grid_fields: [&str; 2] = {
        let parts: Vec<&str> = grid_raw.split_whitespace().collect();
        parts
            .try_into()
            .map_err(|_| ScenarioError::Parse { line: p.pos, msg: "grid needs two values".into() })?
    };
    let grid = (
        parse_num::<u32>(&p, grid_fields[0], "grid width")?,
        parse_num::<u32>(&p, grid_fields[1], "grid height")?,
    );
    let t_max: u32 = p.scalar("t_max")?;
    let tau: f64 = p.scalar("tau")?;
    let beta: f64 = p.scalar("beta")?;
    let f_seed: f64 = p.scalar("f_seed")?;
    let sense_radius: u32 = p.scalar("sense_radius")?;
    let suppression: f64 = p.scalar("suppression")?;
    let ct_assign: u32 = p.scalar("ct_assign")?;
    let delta_t: u32 = p.scalar("delta_t")?;
    let k_line: u32 = p.scalar("k_line")?;
    let n_checked: u32 = p.scalar("n_checked")?;
    let agent_start = p.id_list("agents")?;
    let initial_incidents = p.id_list("incidents")?;

    let mut expected_id = 0u32;
    let nodes = p.section("node", |p, value| {
        let [id, x, y, assets, category] = p.fields(value, "node")?;
        let id: u32 = parse_num(p, id, "node id")?;
        if id != expected_id {
            return Err(p.err(format!("node id {id} out of order, expected {expected_id}")));
        }
        expected_id += 1;
        Ok(NodeSpec {
            x: parse_num(p, x, "node x")?,
            y: parse_num(p, y, "node y")?,
            assets: parse_num(p, assets, "node assets")?,
            category: AssetCategory::parse(category)
                .ok_or_else(|| p.err(format!("unknown category {category:?}")))?,
        })
    })?;

    let edges = p.section("edge", |p, value| {
        let [a, b, len] = p.fields(value, "edge")?;
        Ok((
            parse_num::<u32>(p, a, "edge endpoint")?,
            parse_num::<u32>(p, b, "edge endpoint")?,
            parse_num::<u32>(p, len, "edge length")?,
        ))
    })?;

    let spread_edges = p.section("spread", |p, value| {
        let [a, b, rate] = p.fields(value, "spread edge")?;
        Ok((
            parse_num::<u32>(p, a, "spread endpoint")?,
            parse_num::<u32>(p, b, "spread endpoint")?,
            parse_num::<f64>(p, rate, "spread rate")?,
        ))
    })?;

    let assignments = p.section("assignment", |p, value| {
        let [node, deadline, val] = p.fields(value, "assignment")?;
        Ok((
            parse_num::<u32>(p, node, "assignment node")?,
            parse_num::<u32>(p, deadline, "assignment deadline")?,
            parse_num::<u32>(p, val, "assignment value")?,
        ))
    })?;

    if let Some(extra) = p.peek() {
        return Err(p.err(format!("unexpected line {extra:?}")));
    }

    let cfg = ScenarioConfig {
        name,
        grid,
        t_max,
        tau,
        beta,
        f_seed,
        sense_radius,
        suppression,
        ct_assign,
        delta_t,
        k_line,
        n_checked,
        agent_start,
        initial_incidents,
        nodes,
        edges,
        spread_edges,
        assignments,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_file(cfg: &ScenarioConfig, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    Ok(std::fs::write(path, save(cfg))?)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    load(&std::fs::read_to_string(path)?)
}
