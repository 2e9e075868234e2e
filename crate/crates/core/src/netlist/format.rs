use std::fmt::Write;

use super::{NetlistDoc, ParamValue};

fn write_param(out: &mut String, value: &ParamValue) {
    match value {
        ParamValue::Real(v) => write!(out, "{v}").unwrap(),
        ParamValue::List(vs) => {
            let joined: Vec<String> = vs.iter().map(f64::to_string).collect();
            out.push_str(&joined.join(","));
            if vs.len() == 1 {
                out.push(',');
            }
        }
    }
}

/// Canonical text for a document: blocks in declaration order with keys
/// sorted, then probes, then the sim directive. Comments are not kept.
pub fn format(doc: &NetlistDoc) -> String {
    let mut out = String::new();
    for b in &doc.blocks {
        write!(out, "block {} {}", b.kind, b.name).unwrap();
        for (key, value) in &b.params {
            write!(out, " {key}=").unwrap();
            write_param(&mut out, value);
        }
        if !b.inputs.is_empty() {
            write!(out, " in={}", b.inputs.join(",")).unwrap();
        }
        writeln!(out, " out={}", b.output).unwrap();
    }
    for p in &doc.probes {
        writeln!(out, "probe {}", p.net).unwrap();
    }
    let s = &doc.sim;
    writeln!(
        out,
        "sim dt={} t={} method={} limit={}",
        s.dt, s.t_end, s.method, s.limit
    )
    .unwrap();
    out
}
