//! Line-oriented text format and its JSON mirror.
//!
//! ```text
//! game coin
//! state 0 owner=ran prio=0
//! state 1 owner=max prio=1
//! edge 0 1 reward=1 prob=1/2
//! edge 0 0 reward=-1 prob=1/2
//! edge 1 0 reward=0
//! ```

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Edge, Game, Owner, Rational, State, StateId};

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in body.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token { text: &body[s..i], col: body[..s].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &body[s..], col: body[..s].chars().count() + 1 });
    }
    out
}

pub fn parse_rational(text: &str) -> Option<Rational> {
    let (n, d) = match text.split_once('/') {
        Some((n, d)) => (n.parse::<BigInt>().ok()?, d.parse::<BigInt>().ok()?),
        None => (text.parse::<BigInt>().ok()?, BigInt::one()),
    };
    if !d.is_positive() {
        return None;
    }
    Some(Rational::new(n, d))
}

fn int<T: std::str::FromStr>(tok: &Token<'_>, line: usize, what: &str) -> Result<T> {
    tok.text
        .parse()
        .map_err(|_| perr(line, tok.col, format!("expected {what}, found `{}`", tok.text)))
}

fn key_value<'a>(tok: &Token<'a>, line: usize) -> Result<(&'a str, &'a str, usize)> {
    let (k, v) = tok
        .text
        .split_once('=')
        .ok_or_else(|| perr(line, tok.col, format!("expected key=value, found `{}`", tok.text)))?;
    Ok((k, v, tok.col + k.chars().count() + 1))
}

/// Parses the text format; accepts the JSON mirror when the input starts with `{`.
pub fn parse_game(bytes: &[u8]) -> Result<Game> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let prefix = &bytes[..e.valid_up_to()];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
        let col = prefix.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        perr(line, col, "input is not valid UTF-8")
    })?;
    if text.trim_start().starts_with('{') {
        return parse_game_json(text);
    }
    let mut name = String::new();
    let mut states: Vec<Option<(State, usize)>> = Vec::new();
    let mut edges: Vec<(Edge, usize, usize)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let toks = tokenize(raw);
        let Some(head) = toks.first() else { continue };
        match head.text {
            "game" => {
                if toks.len() < 2 {
                    return Err(perr(ln, head.col, "`game` needs a name"));
                }
                name = toks[1..].iter().map(|t| t.text).collect::<Vec<_>>().join(" ");
            }
            "state" => {
                let id_tok = toks.get(1).ok_or_else(|| perr(ln, head.col, "`state` needs an id"))?;
                let id: usize = int(id_tok, ln, "a state id")?;
                let mut owner = None;
                let mut prio = None;
                for tok in &toks[2..] {
                    let (k, v, vcol) = key_value(tok, ln)?;
                    match k {
                        "owner" => {
                            owner = Some(match v {
                                "max" => Owner::Max,
                                "min" => Owner::Min,
                                "ran" => Owner::Random,
                                _ => return Err(perr(ln, vcol, format!("unknown owner `{v}`"))),
                            })
                        }
                        "prio" => {
                            prio = Some(v.parse::<u32>().map_err(|_| {
                                perr(ln, vcol, format!("expected a nonnegative priority, found `{v}`"))
                            })?)
                        }
                        _ => return Err(perr(ln, tok.col, format!("unknown attribute `{k}`"))),
                    }
                }
                let owner = owner.ok_or_else(|| perr(ln, head.col, "state lacks owner="))?;
                let priority = prio.ok_or_else(|| perr(ln, head.col, "state lacks prio="))?;
                if states.len() <= id {
                    states.resize(id + 1, None);
                }
                if states[id].is_some() {
                    return Err(perr(ln, id_tok.col, format!("state {id} declared twice")));
                }
                states[id] = Some((State { owner, priority }, ln));
            }
            "edge" => {
                if toks.len() < 4 {
                    return Err(perr(ln, head.col, "`edge` needs src, dst and reward="));
                }
                let src: usize = int(&toks[1], ln, "a source state")?;
                let dst: usize = int(&toks[2], ln, "a target state")?;
                let mut reward = None;
                let mut prob = None;
                for tok in &toks[3..] {
                    let (k, v, vcol) = key_value(tok, ln)?;
                    match k {
                        "reward" => {
                            reward = Some(v.parse::<i64>().map_err(|_| {
                                perr(ln, vcol, format!("expected an integer reward, found `{v}`"))
                            })?)
                        }
                        "prob" => {
                            prob = Some(parse_rational(v).ok_or_else(|| {
                                perr(ln, vcol, format!("expected a probability p/q, found `{v}`"))
                            })?)
                        }
                        _ => return Err(perr(ln, tok.col, format!("unknown attribute `{k}`"))),
                    }
                }
                let reward = reward.ok_or_else(|| perr(ln, head.col, "edge lacks reward="))?;
                edges.push((Edge { src: StateId(src), dst: StateId(dst), reward, prob }, ln, toks[1].col));
            }
            other => return Err(perr(ln, head.col, format!("unknown directive `{other}`"))),
        }
    }
    let mut table = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        match s {
            Some((st, _)) => table.push(*st),
            None => return Err(Error::InvalidGame(format!("state ids are not dense: {i} is missing"))),
        }
    }
    for (e, ln, col) in &edges {
        for end in [e.src, e.dst] {
            if end.0 >= table.len() {
                return Err(perr(*ln, *col, format!("dangling reference to undeclared state {end}")));
            }
        }
    }
    Game::new(name, table, edges.into_iter().map(|(e, _, _)| e).collect())
}

fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Canonical text: states ascending, edges in lexicographic order.
pub fn to_text(g: &Game) -> String {
    let mut out = String::new();
    if !g.name().is_empty() {
        let _ = writeln!(out, "game {}", g.name());
    }
    for s in g.ids() {
        let st = g.state(s);
        let _ = writeln!(out, "state {} owner={} prio={}", s, st.owner.keyword(), st.priority);
    }
    for e in g.edges() {
        let _ = write!(out, "edge {} {} reward={}", e.src, e.dst, e.reward);
        if let Some(p) = &e.prob {
            let _ = write!(out, " prob={}", fmt_rational(p));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize)]
struct JsonState {
    id: usize,
    owner: Owner,
    prio: u32,
}

#[derive(Serialize, Deserialize)]
struct JsonEdge {
    src: usize,
    dst: usize,
    reward: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prob: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonGame {
    #[serde(default)]
    name: String,
    states: Vec<JsonState>,
    edges: Vec<JsonEdge>,
}

pub fn to_json(g: &Game) -> serde_json::Value {
    let doc = JsonGame {
        name: g.name().to_string(),
        states: g
            .ids()
            .map(|s| JsonState { id: s.0, owner: g.owner(s), prio: g.priority(s) })
            .collect(),
        edges: g
            .edges()
            .iter()
            .map(|e| JsonEdge {
                src: e.src.0,
                dst: e.dst.0,
                reward: e.reward,
                prob: e.prob.as_ref().map(fmt_rational),
            })
            .collect(),
    };
    serde_json::to_value(doc).expect("game serializes")
}

pub fn parse_game_json(text: &str) -> Result<Game> {
    let doc: JsonGame = serde_json::from_str(text)
        .map_err(|e| perr(e.line(), e.column(), format!("malformed JSON game: {e}")))?;
    let n = doc.states.len();
    let mut table = vec![None; n];
    for s in &doc.states {
        if s.id >= n || table[s.id].is_some() {
            return Err(Error::InvalidGame(format!("state ids are not dense at {}", s.id)));
        }
        table[s.id] = Some(State { owner: s.owner, priority: s.prio });
    }
    let states = table.into_iter().map(Option::unwrap).collect();
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in doc.edges {
        let prob = match e.prob {
            Some(p) => Some(parse_rational(&p).ok_or_else(|| {
                Error::InvalidGame(format!("edge {} -> {}: bad probability `{p}`", e.src, e.dst))
            })?),
            None => None,
        };
        edges.push(Edge { src: StateId(e.src), dst: StateId(e.dst), reward: e.reward, prob });
    }
    Game::new(doc.name, states, edges)
}
