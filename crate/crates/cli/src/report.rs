//! Deterministic report serialization.
//!
//! Reports are JSON with insertion-ordered keys and 17-significant-digit
//! numbers, so identical analyses produce byte-identical files.

use crate::matfile::fmt_f64;
use mpinv_core::mat::Mat;
use mpinv_core::perturb::{BoundRow, GapRecord, PredicateReport, RowKind, StabilityReport};

/// JSON value with insertion-ordered object keys.
pub enum Json {
    Bool(bool),
    UInt(u64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj(fields: Vec<(&str, Json)>) -> Json {
        Json::Obj(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn to_pretty_string(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::UInt(u) => out.push_str(&u.to_string()),
            // fmt_f64 yields a bare number for finite values and a quoted
            // token for inf/nan, both valid JSON value tokens.
            Json::Num(x) => out.push_str(&fmt_f64(*x)),
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    out.push('"');
                    out.push_str(k);
                    out.push_str("\": ");
                    v.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

pub fn matrix_json(m: &Mat) -> Json {
    let complex = !m.is_real();
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m.get(i, j);
            if complex {
                data.push(Json::Arr(vec![Json::Num(z.re), Json::Num(z.im)]));
            } else {
                data.push(Json::Num(z.re));
            }
        }
    }
    Json::obj(vec![
        ("rows", Json::UInt(m.rows() as u64)),
        ("cols", Json::UInt(m.cols() as u64)),
        ("complex", Json::Bool(complex)),
        ("data", Json::Arr(data)),
    ])
}

pub fn bound_row_json(row: &BoundRow) -> Json {
    let kind = match row.kind {
        RowKind::Inequality => "inequality",
        RowKind::Identity => "identity",
        RowKind::Context => "context",
    };
    Json::obj(vec![
        ("name", Json::Str(row.name.clone())),
        ("kind", Json::Str(kind.to_string())),
        ("lhs", Json::Num(row.lhs)),
        ("rhs", Json::Num(row.rhs)),
        ("slack", Json::Num(row.slack)),
        ("holds", Json::Bool(row.holds)),
    ])
}

pub fn predicates_json(p: &PredicateReport) -> Json {
    let mut fields = vec![
        ("class", Json::Str(p.class.as_str().to_string())),
        (
            "is_stable",
            Json::Bool(p.class == mpinv_core::perturb::StabilityClass::Stable),
        ),
        ("sigma_p1", Json::Num(p.sigma_p1)),
    ];
    let names = ["p1", "p2", "p3", "p4", "p5"];
    for (name, pred) in names.iter().zip(p.predicates.iter()) {
        fields.push((
            name,
            Json::obj(vec![
                ("holds", Json::Bool(pred.holds)),
                ("margin", Json::Num(pred.margin)),
            ]),
        ));
    }
    Json::obj(fields)
}

pub fn gaps_json(g: &GapRecord) -> Json {
    Json::obj(vec![
        ("range_gap", Json::Num(g.range_gap)),
        ("kernel_gap", Json::Num(g.kernel_gap)),
        ("gap_hat_range", Json::Num(g.gap_hat_range)),
        ("projector_diff", Json::Num(g.projector_diff)),
    ])
}

pub fn norms_json(r: &StabilityReport, extra: Vec<(&str, Json)>) -> Json {
    let mut fields = vec![
        ("norm_t", Json::Num(r.norm_t)),
        ("norm_tbar", Json::Num(r.norm_tbar)),
        ("norm_pinv_t", Json::Num(r.norm_pinv_t)),
        ("norm_pinv_tbar_oracle", Json::Num(r.norm_pinv_tbar)),
        ("dt_norm_2", Json::Num(r.dt_norm_2)),
        ("dt_norm_t", Json::Num(r.dt_norm_t)),
        ("inv_norm", Json::Num(r.inv_norm)),
    ];
    if let Some(d) = r.formula_oracle_dist {
        fields.push(("formula_oracle_dist", Json::Num(d)));
    }
    fields.extend(extra);
    Json::obj(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_deterministic_and_ordered() {
        let j = Json::obj(vec![
            ("zeta", Json::Num(1.5)),
            ("alpha", Json::Bool(true)),
            ("list", Json::Arr(vec![Json::UInt(1), Json::Str("x\"y".into())])),
        ]);
        let a = j.to_pretty_string();
        let b = j.to_pretty_string();
        assert_eq!(a, b);
        // Insertion order is preserved (zeta before alpha).
        assert!(a.find("zeta").unwrap() < a.find("alpha").unwrap());
        assert!(a.contains("x\\\"y"));
    }

    #[test]
    fn non_finite_numbers_serialize_as_quoted_tokens() {
        let j = Json::obj(vec![("worst", Json::Num(f64::INFINITY))]);
        let s = j.to_pretty_string();
        assert!(s.contains("\"worst\": \"inf\""));
    }
}
