use std::collections::{BTreeMap, HashMap};

use super::{
    is_identifier, BlockDecl, NetlistDoc, NetlistError, ParamValue, ProbeDecl, SimDirective,
    MAX_STEPS,
};
use crate::blocks::KindTag;
use crate::signal::DEFAULT_MAX_ABS;

/// A whitespace-delimited token with its 1-based column.
#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in code.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    text: &code[s..i],
                    column: code[..s].chars().count() + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &code[s..],
            column: code[..s].chars().count() + 1,
        });
    }
    out
}

struct LineCtx {
    line: usize,
}

impl LineCtx {
    fn err(&self, column: usize, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn identifier<'a>(&self, tok: Token<'a>, what: &str) -> Result<&'a str, NetlistError> {
        if is_identifier(tok.text) {
            Ok(tok.text)
        } else {
            Err(self.err(tok.column, format!("invalid {what} `{}`", tok.text)))
        }
    }

    fn key_value<'a>(&self, tok: Token<'a>) -> Result<(&'a str, &'a str, usize), NetlistError> {
        let Some((key, value)) = tok.text.split_once('=') else {
            return Err(self.err(tok.column, format!("expected key=value, got `{}`", tok.text)));
        };
        if !is_identifier(key) {
            return Err(self.err(tok.column, format!("invalid key `{key}`")));
        }
        if value.is_empty() {
            return Err(self.err(tok.column, format!("missing value for `{key}`")));
        }
        Ok((key, value, tok.column + key.len() + 1))
    }

    fn real(&self, text: &str, column: usize) -> Result<f64, NetlistError> {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(column, format!("expected a finite number, got `{text}`"))),
        }
    }

    fn param(&self, text: &str, column: usize) -> Result<ParamValue, NetlistError> {
        if !text.contains(',') {
            return self.real(text, column).map(ParamValue::Real);
        }
        let body = text.strip_suffix(',').unwrap_or(text);
        let mut values = Vec::new();
        let mut col = column;
        for item in body.split(',') {
            values.push(self.real(item, col)?);
            col += item.len() + 1;
        }
        Ok(ParamValue::List(values))
    }

    fn nets(&self, text: &str, column: usize) -> Result<Vec<String>, NetlistError> {
        let mut col = column;
        text.split(',')
            .map(|net| {
                let here = col;
                col += net.len() + 1;
                if is_identifier(net) {
                    Ok(net.to_string())
                } else {
                    Err(self.err(here, format!("invalid net name `{net}`")))
                }
            })
            .collect()
    }
}

fn parse_block(ctx: &LineCtx, toks: &[Token<'_>]) -> Result<BlockDecl, NetlistError> {
    let head = toks[0];
    let Some(&kind_tok) = toks.get(1) else {
        return Err(ctx.err(head.column + head.text.len(), "expected block kind"));
    };
    let kind: KindTag = kind_tok.text.parse().map_err(|_| NetlistError::UnknownKind {
        line: ctx.line,
        column: kind_tok.column,
        kind: kind_tok.text.to_string(),
    })?;
    let Some(&name_tok) = toks.get(2) else {
        return Err(ctx.err(
            kind_tok.column + kind_tok.text.len(),
            "expected block name",
        ));
    };
    let name = ctx.identifier(name_tok, "block name")?;

    let mut params = BTreeMap::new();
    let mut inputs = None;
    let mut output = None;
    for &tok in &toks[3..] {
        let (key, value, vcol) = ctx.key_value(tok)?;
        let duplicate = match key {
            "in" => inputs.replace(ctx.nets(value, vcol)?).is_some(),
            "out" => output
                .replace(ctx.identifier(
                    Token {
                        text: value,
                        column: vcol,
                    },
                    "net name",
                )?)
                .is_some(),
            _ => params
                .insert(key.to_string(), ctx.param(value, vcol)?)
                .is_some(),
        };
        if duplicate {
            return Err(ctx.err(tok.column, format!("`{key}` given twice")));
        }
    }
    let Some(output) = output else {
        return Err(ctx.err(name_tok.column, format!("block `{name}` has no out= net")));
    };
    Ok(BlockDecl {
        name: name.to_string(),
        kind,
        params,
        inputs: inputs.unwrap_or_default(),
        output: output.to_string(),
        line: ctx.line,
    })
}

fn parse_sim(ctx: &LineCtx, toks: &[Token<'_>]) -> Result<SimDirective, NetlistError> {
    let (mut dt, mut t_end, mut method, mut limit) = (None, None, None, None);
    for &tok in &toks[1..] {
        let (key, value, vcol) = ctx.key_value(tok)?;
        let duplicate = match key {
            "dt" => dt.replace((ctx.real(value, vcol)?, vcol)).is_some(),
            "t" => t_end.replace((ctx.real(value, vcol)?, vcol)).is_some(),
            "limit" => limit.replace((ctx.real(value, vcol)?, vcol)).is_some(),
            "method" => method
                .replace(value.parse().map_err(|e: String| ctx.err(vcol, e))?)
                .is_some(),
            other => return Err(ctx.err(tok.column, format!("unknown sim key `{other}`"))),
        };
        if duplicate {
            return Err(ctx.err(tok.column, format!("`{key}` given twice")));
        }
    }
    let end_col = toks.last().map_or(1, |t| t.column + t.text.len());
    let (dt, dt_col) = dt.ok_or_else(|| ctx.err(end_col, "sim needs dt="))?;
    let (t_end, t_col) = t_end.ok_or_else(|| ctx.err(end_col, "sim needs t="))?;
    let method = method.ok_or_else(|| ctx.err(end_col, "sim needs method="))?;
    if dt <= 0.0 {
        return Err(ctx.err(dt_col, "dt must be positive"));
    }
    if t_end <= 0.0 {
        return Err(ctx.err(t_col, "t must be positive"));
    }
    if t_end / dt > MAX_STEPS {
        return Err(ctx.err(t_col, format!("t/dt exceeds {MAX_STEPS:e} steps")));
    }
    let limit = match limit {
        Some((v, _)) if v > 0.0 => v,
        Some((_, col)) => return Err(ctx.err(col, "limit must be positive")),
        None => DEFAULT_MAX_ABS,
    };
    Ok(SimDirective {
        dt,
        t_end,
        method,
        limit,
        line: ctx.line,
    })
}

/// Parses netlist text. Structural checks (arity, drivers, loops) are left
/// to [`validate`](super::validate).
pub fn parse(text: &str) -> Result<NetlistDoc, NetlistError> {
    let mut blocks: Vec<BlockDecl> = Vec::new();
    let mut probes: Vec<ProbeDecl> = Vec::new();
    let mut sim: Option<SimDirective> = None;
    let mut block_lines: HashMap<String, usize> = HashMap::new();
    let mut line_count = 0;

    for (idx, raw) in text.lines().enumerate() {
        let ctx = LineCtx { line: idx + 1 };
        line_count = idx + 1;
        let toks = tokenize(raw);
        let Some(&head) = toks.first() else {
            continue;
        };
        match head.text {
            "block" => {
                let decl = parse_block(&ctx, &toks)?;
                if let Some(&first_line) = block_lines.get(&decl.name) {
                    return Err(NetlistError::DuplicateBlock {
                        name: decl.name,
                        first_line,
                        line: ctx.line,
                    });
                }
                block_lines.insert(decl.name.clone(), ctx.line);
                blocks.push(decl);
            }
            "probe" => {
                let [_, net_tok] = toks[..] else {
                    return Err(ctx.err(head.column, "expected `probe <net>`"));
                };
                let net = ctx.identifier(net_tok, "net name")?;
                if let Some(first) = probes.iter().find(|p| p.net == net) {
                    return Err(NetlistError::DuplicateProbe {
                        net: net.to_string(),
                        first_line: first.line,
                        line: ctx.line,
                    });
                }
                probes.push(ProbeDecl {
                    net: net.to_string(),
                    line: ctx.line,
                });
            }
            "sim" => {
                let directive = parse_sim(&ctx, &toks)?;
                if let Some(first) = sim {
                    return Err(NetlistError::DuplicateSim {
                        first_line: first.line,
                        line: ctx.line,
                    });
                }
                sim = Some(directive);
            }
            other => {
                return Err(ctx.err(
                    head.column,
                    format!("expected `block`, `probe` or `sim`, got `{other}`"),
                ))
            }
        }
    }

    let sim = sim.ok_or(NetlistError::MissingSim {
        line: line_count.max(1),
    })?;
    Ok(NetlistDoc {
        blocks,
        probes,
        sim,
    })
}
