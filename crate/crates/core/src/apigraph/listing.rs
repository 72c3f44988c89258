//! The `.slst` textual method listing.
//!
//! ```text
//! == Lbocb/lj/korsy/A;-->onReceive ==
//! 8 invoke-direct Ljava/util/ArrayList;-><init>
//! 14 invoke-virtual Lbocb/lj/korsy/A;->getIncomingSMS
//! 46 return-void
//! ```
//!
//! A block starts with a `== <Class>;--><method> ==` header and ends at a blank
//! line. Rows are `<offset> <mnemonic> [target]` where the target is a method
//! signature or a `[<offset>]` branch target. Lines starting with `#` are
//! comments. Signatures naming a method defined in the same document are
//! local calls; every other signature is a framework API.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Api(String),
    Local(String),
    Branch(u32),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRow {
    pub offset: u32,
    pub opcode: String,
    pub target: Target,
}

/// Control-flow role of a row, derived from its mnemonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Conditional(u32),
    Goto(u32),
    Return,
    Next,
}

impl InstructionRow {
    pub fn flow(&self) -> FlowKind {
        match (&self.target, self.opcode.as_str()) {
            (Target::Branch(t), op) if op.starts_with("if-") => FlowKind::Conditional(*t),
            (Target::Branch(t), _) => FlowKind::Goto(*t),
            (_, op) if op.starts_with("return") || op == "throw" => FlowKind::Return,
            _ => FlowKind::Next,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodListing {
    pub class_name: String,
    pub method_name: String,
    pub rows: Vec<InstructionRow>,
}

impl MethodListing {
    /// `Lpkg/Cls;->name`
    pub fn signature(&self) -> String {
        method_signature(&self.class_name, &self.method_name)
    }

    /// Offsets strictly increasing, branch targets present, rows non-empty.
    pub fn validate(&self) -> Result<()> {
        validate_class_name(&self.class_name).map_err(|m| Error::parse(0, m))?;
        if self.rows.is_empty() {
            return Err(Error::parse(0, format!("method {} has no rows", self.signature())));
        }
        let offsets: HashSet<u32> = self.rows.iter().map(|r| r.offset).collect();
        for pair in self.rows.windows(2) {
            if pair[1].offset <= pair[0].offset {
                return Err(Error::parse(
                    0,
                    format!("offsets not increasing in {}", self.signature()),
                ));
            }
        }
        for row in &self.rows {
            if let Target::Branch(t) = row.target {
                if !offsets.contains(&t) {
                    return Err(Error::parse(
                        0,
                        format!("branch target [{t}] missing in {}", self.signature()),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn method_signature(class_name: &str, method_name: &str) -> String {
    format!("{class_name}->{method_name}")
}

/// Splits `Lpkg/Cls;->name` (or the `-->` spelling) into class and method.
pub fn split_signature(sig: &str) -> Option<(&str, &str)> {
    let pos = sig.find(";-")?;
    let class = &sig[..=pos];
    let rest = &sig[pos + 1..];
    let method = rest.strip_prefix("-->").or_else(|| rest.strip_prefix("->"))?;
    if method.is_empty() || validate_class_name(class).is_err() {
        return None;
    }
    Some((class, method))
}

fn validate_class_name(class: &str) -> std::result::Result<(), String> {
    if class.len() < 3 || !class.starts_with('L') || !class.ends_with(';') {
        return Err(format!("class descriptor {class:?} must look like L...;"));
    }
    Ok(())
}

fn normalize_signature(sig: &str) -> Option<String> {
    split_signature(sig).map(|(c, m)| method_signature(c, m))
}

enum RawTarget {
    Signature(String),
    Branch(u32),
    None,
}

struct RawRow {
    line: usize,
    offset: u32,
    opcode: String,
    target: RawTarget,
}

struct RawBlock {
    line: usize,
    class_name: String,
    method_name: String,
    rows: Vec<RawRow>,
}

/// Parses a listing document into one [`MethodListing`] per block.
pub fn parse_listing(text: &str) -> Result<Vec<MethodListing>> {
    let mut blocks: Vec<RawBlock> = Vec::new();
    let mut open = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            open = false;
            continue;
        }
        if line.starts_with("==") {
            let inner = line
                .strip_prefix("==")
                .and_then(|s| s.strip_suffix("=="))
                .map(str::trim)
                .ok_or_else(|| Error::parse(line_no, "malformed method header"))?;
            let (class, method) = split_signature(inner)
                .ok_or_else(|| Error::parse(line_no, format!("malformed method header {inner:?}")))?;
            blocks.push(RawBlock {
                line: line_no,
                class_name: class.to_owned(),
                method_name: method.to_owned(),
                rows: Vec::new(),
            });
            open = true;
            continue;
        }
        if !open {
            return Err(Error::parse(line_no, "instruction row outside a method block"));
        }
        let row = parse_row(line, line_no)?;
        blocks.last_mut().expect("open block").rows.push(row);
    }

    let mut seen = HashSet::new();
    for b in &blocks {
        if !seen.insert(method_signature(&b.class_name, &b.method_name)) {
            return Err(Error::parse(
                b.line,
                format!("duplicate method header {}-->{}", b.class_name, b.method_name),
            ));
        }
    }

    blocks.into_iter().map(|b| resolve_block(b, &seen)).collect()
}

fn parse_row(line: &str, line_no: usize) -> Result<RawRow> {
    let mut parts = line.split_whitespace();
    let offset_tok = parts.next().ok_or_else(|| Error::parse(line_no, "empty row"))?;
    let offset: u32 = offset_tok
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad offset {offset_tok:?}")))?;
    let opcode = parts
        .next()
        .ok_or_else(|| Error::parse(line_no, "row without mnemonic"))?
        .to_owned();
    let target = match parts.next() {
        None => RawTarget::None,
        Some(tok) if tok.starts_with('[') => {
            let inner = tok
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| Error::parse(line_no, format!("bad branch target {tok:?}")))?;
            let t = inner
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad branch target {tok:?}")))?;
            RawTarget::Branch(t)
        }
        Some(tok) => RawTarget::Signature(
            normalize_signature(tok)
                .ok_or_else(|| Error::parse(line_no, format!("bad target {tok:?}")))?,
        ),
    };
    if let Some(extra) = parts.next() {
        return Err(Error::parse(line_no, format!("unexpected token {extra:?}")));
    }
    let is_branch_op = opcode.starts_with("if-") || opcode.starts_with("goto");
    match (&target, is_branch_op) {
        (RawTarget::Branch(_), false) => {
            return Err(Error::parse(line_no, format!("{opcode} cannot take a branch target")))
        }
        (RawTarget::Branch(_), true) => {}
        (_, true) => {
            return Err(Error::parse(line_no, format!("{opcode} needs a [offset] target")))
        }
        _ => {}
    }
    Ok(RawRow {
        line: line_no,
        offset,
        opcode,
        target,
    })
}

fn resolve_block(b: RawBlock, locals: &HashSet<String>) -> Result<MethodListing> {
    if b.rows.is_empty() {
        return Err(Error::parse(b.line, "method block without rows"));
    }
    let offsets: HashSet<u32> = b.rows.iter().map(|r| r.offset).collect();
    let mut prev: Option<u32> = None;
    let mut rows = Vec::with_capacity(b.rows.len());
    for r in b.rows {
        if prev.is_some_and(|p| r.offset <= p) {
            return Err(Error::parse(r.line, format!("offset {} not increasing", r.offset)));
        }
        prev = Some(r.offset);
        let target = match r.target {
            RawTarget::None => Target::None,
            RawTarget::Branch(t) => {
                if !offsets.contains(&t) {
                    return Err(Error::parse(
                        r.line,
                        format!("branch target [{t}] is not an offset of this method"),
                    ));
                }
                Target::Branch(t)
            }
            RawTarget::Signature(s) if locals.contains(&s) => Target::Local(s),
            RawTarget::Signature(s) => Target::Api(s),
        };
        rows.push(InstructionRow {
            offset: r.offset,
            opcode: r.opcode,
            target,
        });
    }
    Ok(MethodListing {
        class_name: b.class_name,
        method_name: b.method_name,
        rows,
    })
}

impl fmt::Display for InstructionRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.offset, self.opcode)?;
        match &self.target {
            Target::Api(s) | Target::Local(s) => write!(f, " {s}"),
            Target::Branch(t) => write!(f, " [{t}]"),
            Target::None => Ok(()),
        }
    }
}

/// Renders listings back to `.slst` text.
pub fn print_listing(methods: &[MethodListing]) -> String {
    let mut out = String::new();
    for (i, m) in methods.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "== {}-->{} ==", m.class_name, m.method_name);
        for row in &m.rows {
            let _ = writeln!(out, "{row}");
        }
    }
    out
}

/// Distinct framework API signatures invoked anywhere in the listings.
pub fn api_usage(methods: &[MethodListing]) -> BTreeSet<String> {
    methods
        .iter()
        .flat_map(|m| &m.rows)
        .filter_map(|r| match &r.target {
            Target::Api(s) => Some(s.clone()),
            _ => None,
        })
        .collect()
}
