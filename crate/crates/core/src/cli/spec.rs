//! Channel and state documents, schema version "1".
//!
//! Complex numbers are `[re, im]` pairs; layouts are lists of `[label, dim]`.
//!
//! Channel document, one of:
//! ```json
//! {"schema": "1", "name": "depolarizing", "p": 0.5, "dims": 2, "labels": {"in": ["A"], "out": ["B"]}}
//! {"schema": "1", "kraus": [[[[1,0],[0,0]],[[0,0],[1,0]]]], "in_dims": [2], "out_dims": [2],
//!  "labels": {"in": ["A"], "out": ["B"]}}
//! {"schema": "1", "cq": [<state>, ...], "in_dims": [2, 2], "labels": {"in": ["X1", "X2"]}}
//! {"schema": "1", "tensor": [<channel>, <channel>]}
//! ```
//! Builtin names: identity, depolarizing (p), dephasing (p), amplitude_damping (gamma),
//! erasure (p). Builtin labels default to A → B.
//!
//! State document:
//! ```json
//! {"schema": "1", "state": <state>, "resource": ["B'"], "side": [], "tau": <state>,
//!  "receivers": [{"outputs": ["B"], "resource": ["B'"]}, {"outputs": ["C"], "resource": ["C'"]}],
//!  "products": [[["B'"], ["C'"]]]}
//! ```
//! Only `state` is required. `<state>` is one of `{"bell": {"a", "b", "dim"}}`,
//! `{"ket": {"layout", "amplitudes"}}`, `{"density": {"layout", "matrix"}}`,
//! `{"diagonal": {"layout", "probs"}}`, `{"maximally_mixed": {"layout"}}`,
//! `{"basis": {"layout", "index"}}`, `{"classical_copy": {"labels", "probs"}}`
//! (Σ p_u |u…u⟩⟨u…u|) or `{"tensor": [<state>, ...]}`.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::channel::{Builtin, KrausChannel};
use crate::coding::protocols::check_product;
use crate::coding::Receiver;
use crate::error::{Error, Result};
use crate::qalg::{c, CMat, CVec, DensityOp, Ket, SystemLayout};

pub const SCHEMA_VERSION: &str = "1";

type Pair = [f64; 2];
type LayoutSpec = Vec<(String, usize)>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(rename = "in", default)]
    pub input: Vec<String>,
    #[serde(default)]
    pub out: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub schema: Option<String>,
    pub name: Option<String>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub dims: Option<usize>,
    pub kraus: Option<Vec<Vec<Vec<Pair>>>>,
    pub cq: Option<Vec<StateSpec>>,
    pub tensor: Option<Vec<ChannelSpec>>,
    pub in_dims: Option<Vec<usize>>,
    pub out_dims: Option<Vec<usize>>,
    pub labels: Option<Labels>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Bell {
        a: String,
        b: String,
        #[serde(default = "two")]
        dim: usize,
    },
    Ket {
        layout: LayoutSpec,
        amplitudes: Vec<Pair>,
    },
    Density {
        layout: LayoutSpec,
        matrix: Vec<Vec<Pair>>,
    },
    Diagonal {
        layout: LayoutSpec,
        probs: Vec<f64>,
    },
    MaximallyMixed {
        layout: LayoutSpec,
    },
    Basis {
        layout: LayoutSpec,
        index: usize,
    },
    ClassicalCopy {
        labels: Vec<String>,
        probs: Vec<f64>,
    },
    Tensor(Vec<StateSpec>),
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub outputs: Vec<String>,
    pub resource: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub schema: Option<String>,
    pub state: StateSpec,
    pub resource: Option<Vec<String>>,
    #[serde(default)]
    pub side: Vec<String>,
    pub tau: Option<StateSpec>,
    pub receivers: Option<Vec<ReceiverSpec>>,
    #[serde(default)]
    pub products: Vec<[Vec<String>; 2]>,
}

/// A state document resolved against the qalg types.
#[derive(Clone, Debug)]
pub struct LoadedState {
    pub state: DensityOp,
    pub resource: Option<Vec<String>>,
    pub side: Vec<String>,
    pub tau: Option<DensityOp>,
    pub receivers: Option<[Receiver; 2]>,
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Spec { path: p, message } => Error::spec(format!("{path}.{p}"), message),
        other => Error::spec(path, other.to_string()),
    }
}

fn check_schema(schema: &Option<String>, path: &str) -> Result<()> {
    match schema.as_deref() {
        None | Some(SCHEMA_VERSION) => Ok(()),
        Some(v) => Err(Error::spec(
            format!("{path}schema"),
            format!("unsupported schema version \"{v}\", expected \"{SCHEMA_VERSION}\""),
        )),
    }
}

/// Deserializes `value`, reporting the failing field as a dotted path.
pub fn from_value<T: for<'de> Deserialize<'de>>(value: &Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::spec(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
    })
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::spec(path.display().to_string(), e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::spec(path.display().to_string(), e.to_string()))
}

fn layout_of(spec: &LayoutSpec) -> Result<SystemLayout> {
    SystemLayout::new(spec.iter().map(|(l, d)| (l.as_str(), *d)))
}

fn complex_vec(v: &[Pair]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|p| c(p[0], p[1])))
}

fn complex_matrix(rows: &[Vec<Pair>], path: &str) -> Result<CMat> {
    let r = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|row| row.len() != cols) {
        return Err(Error::spec(
            format!("{path}[{i}]"),
            format!("row has {} entries, expected {cols}", rows[i].len()),
        ));
    }
    Ok(CMat::from_fn(r, cols, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn build_state(spec: &StateSpec, path: &str) -> Result<DensityOp> {
    let r = match spec {
        StateSpec::Bell { a, b, dim } => Ket::maximally_entangled(a, b, *dim).map(|k| k.density()),
        StateSpec::Ket { layout, amplitudes } => layout_of(layout)
            .and_then(|l| Ket::new(complex_vec(amplitudes), l))
            .map(|k| k.density()),
        StateSpec::Density { layout, matrix } => {
            let m = complex_matrix(matrix, &format!("{path}.density.matrix"))?;
            layout_of(layout).and_then(|l| DensityOp::new(m, l))
        }
        StateSpec::Diagonal { layout, probs } => layout_of(layout).and_then(|l| DensityOp::diagonal(probs, &l)),
        StateSpec::MaximallyMixed { layout } => layout_of(layout).map(|l| DensityOp::maximally_mixed(&l)),
        StateSpec::Basis { layout, index } => layout_of(layout).and_then(|l| DensityOp::basis(&l, *index)),
        StateSpec::ClassicalCopy { labels, probs } => {
            let d = probs.len();
            SystemLayout::new(labels.iter().map(|l| (l.as_str(), d))).and_then(|l| {
                let mut diag = vec![0.0; l.total_dim()];
                let stride: usize = (0..labels.len()).map(|k| d.pow(k as u32)).sum();
                for (u, p) in probs.iter().enumerate() {
                    diag[u * stride] = *p;
                }
                DensityOp::diagonal(&diag, &l)
            })
        }
        StateSpec::Tensor(parts) => {
            let mut it = parts.iter().enumerate();
            let (_, first) = it
                .next()
                .ok_or_else(|| Error::spec(format!("{path}.tensor"), "empty tensor product"))?;
            let mut acc = build_state(first, &format!("{path}.tensor[0]"))?;
            for (i, p) in it {
                acc = acc.tensor(&build_state(p, &format!("{path}.tensor[{i}]"))?)?;
            }
            Ok(acc)
        }
    };
    r.map_err(|e| at(path, e))
}

fn builtin(name: &str, spec: &ChannelSpec, path: &str) -> Result<Builtin> {
    let need = |v: Option<f64>, field: &str| {
        v.ok_or_else(|| Error::spec(format!("{path}.{field}"), format!("builtin `{name}` needs `{field}`")))
    };
    Ok(match name {
        "identity" => Builtin::Identity,
        "depolarizing" => Builtin::Depolarizing { p: need(spec.p, "p")? },
        "dephasing" => Builtin::Dephasing { p: need(spec.p, "p")? },
        "amplitude_damping" => Builtin::AmplitudeDamping {
            gamma: need(spec.gamma, "gamma")?,
        },
        "erasure" => Builtin::Erasure { p: need(spec.p, "p")? },
        other => {
            return Err(Error::spec(
                format!("{path}.name"),
                format!("unknown builtin `{other}` (identity, depolarizing, dephasing, amplitude_damping, erasure)"),
            ))
        }
    })
}

fn labelled(labels: &[String], dims: &[usize], path: &str) -> Result<SystemLayout> {
    if labels.len() != dims.len() {
        return Err(Error::spec(
            path,
            format!("{} labels for {} dimensions", labels.len(), dims.len()),
        ));
    }
    SystemLayout::new(labels.iter().map(String::as_str).zip(dims.iter().copied())).map_err(|e| at(path, e))
}

pub fn build_channel(spec: &ChannelSpec, path: &str) -> Result<KrausChannel> {
    let forms = [spec.name.is_some(), spec.kraus.is_some(), spec.cq.is_some(), spec.tensor.is_some()];
    if forms.iter().filter(|f| **f).count() != 1 {
        return Err(Error::spec(
            if path.is_empty() { "<root>" } else { path },
            "exactly one of `name`, `kraus`, `cq`, `tensor` is required",
        ));
    }
    let p = |f: &str| if path.is_empty() { f.to_string() } else { format!("{path}.{f}") };
    let labels = spec.labels.clone().unwrap_or(Labels {
        input: Vec::new(),
        out: Vec::new(),
    });
    if let Some(name) = &spec.name {
        let b = builtin(name, spec, path)?;
        let dim = spec.dims.ok_or_else(|| Error::spec(p("dims"), "builtin channels need `dims`"))?;
        let one = |v: &[String], default: &str, f: &str| -> Result<String> {
            match v {
                [] => Ok(default.to_string()),
                [l] => Ok(l.clone()),
                _ => Err(Error::spec(p(f), "builtin channels take one input and one output label")),
            }
        };
        let i = one(&labels.input, "A", "labels.in")?;
        let o = one(&labels.out, "B", "labels.out")?;
        return b.build(dim, &i, &o).map_err(|e| at(path, e));
    }
    if let Some(kraus) = &spec.kraus {
        let in_dims = spec.in_dims.as_ref().ok_or_else(|| Error::spec(p("in_dims"), "required with `kraus`"))?;
        let out_dims = spec.out_dims.as_ref().ok_or_else(|| Error::spec(p("out_dims"), "required with `kraus`"))?;
        let inl = labelled(&labels.input, in_dims, &p("labels.in"))?;
        let outl = labelled(&labels.out, out_dims, &p("labels.out"))?;
        let ops = kraus
            .iter()
            .enumerate()
            .map(|(i, k)| complex_matrix(k, &p(&format!("kraus[{i}]"))))
            .collect::<Result<Vec<_>>>()?;
        return KrausChannel::new(ops, inl, outl).map_err(|e| at(&p("kraus"), e));
    }
    if let Some(outputs) = &spec.cq {
        let in_dims = spec.in_dims.as_ref().ok_or_else(|| Error::spec(p("in_dims"), "required with `cq`"))?;
        let inl = labelled(&labels.input, in_dims, &p("labels.in"))?;
        let states = outputs
            .iter()
            .enumerate()
            .map(|(i, s)| build_state(s, &p(&format!("cq[{i}]"))))
            .collect::<Result<Vec<_>>>()?;
        return KrausChannel::cq_on(&inl, &states).map_err(|e| at(&p("cq"), e));
    }
    let parts = spec.tensor.as_ref().expect("one form is present");
    let mut acc: Option<KrausChannel> = None;
    for (i, c) in parts.iter().enumerate() {
        let ch = build_channel(c, &p(&format!("tensor[{i}]")))?;
        acc = Some(match acc {
            None => ch,
            Some(a) => a.tensor(&ch).map_err(|e| at(&p("tensor"), e))?,
        });
    }
    acc.ok_or_else(|| Error::spec(p("tensor"), "empty tensor product"))
}

pub fn parse_channel(value: &Value) -> Result<KrausChannel> {
    let spec: ChannelSpec = from_value(value)?;
    check_schema(&spec.schema, "")?;
    build_channel(&spec, "")
}

pub fn parse_state(value: &Value) -> Result<LoadedState> {
    let doc: StateDoc = from_value(value)?;
    check_schema(&doc.schema, "")?;
    let state = build_state(&doc.state, "state")?;
    for (i, [p, q]) in doc.products.iter().enumerate() {
        check_product(&state, p, q, "declared product").map_err(|e| at(&format!("products[{i}]"), e))?;
    }
    let tau = doc.tau.as_ref().map(|t| build_state(t, "tau")).transpose()?;
    let receivers = match doc.receivers {
        None => None,
        Some(rs) => {
            let [a, b]: [ReceiverSpec; 2] = rs
                .try_into()
                .map_err(|v: Vec<_>| Error::spec("receivers", format!("expected 2 receivers, got {}", v.len())))?;
            let conv = |r: ReceiverSpec| Receiver {
                outputs: r.outputs,
                resource: r.resource,
            };
            Some([conv(a), conv(b)])
        }
    };
    for (i, l) in doc.resource.iter().flatten().chain(&doc.side).enumerate() {
        if !state.layout().contains(l) {
            return Err(Error::spec(format!("resource/side[{i}]"), format!("`{l}` is not a register of the state")));
        }
    }
    Ok(LoadedState {
        state,
        resource: doc.resource,
        side: doc.side,
        tau,
        receivers,
    })
}

/// Shorthand channel names: `identity2`, `depolarizing2:0.5`, `amplitude_damping3:0.1`.
pub fn channel_shorthand(s: &str) -> Option<Value> {
    let (head, param) = match s.split_once(':') {
        Some((h, p)) => (h, Some(p.parse::<f64>().ok()?)),
        None => (s, None),
    };
    let split = head.find(|ch: char| ch.is_ascii_digit())?;
    let (name, dim) = head.split_at(split);
    let dim: usize = dim.parse().ok()?;
    let mut v = serde_json::json!({"schema": SCHEMA_VERSION, "name": name, "dims": dim});
    if let Some(x) = param {
        v[if name == "amplitude_damping" { "gamma" } else { "p" }] = x.into();
    }
    Some(v)
}

/// `bell`: maximally entangled between the channel's single input and a
/// resource named after its single output with a prime.
pub fn state_shorthand(s: &str, channel: Option<&KrausChannel>) -> Option<Value> {
    if s != "bell" {
        return None;
    }
    let ch = channel?;
    let (inp, out) = (ch.in_layout(), ch.out_layout());
    if inp.len() != 1 || out.len() != 1 {
        return None;
    }
    let a = inp.labels()[0].to_string();
    let b = format!("{}'", out.labels()[0]);
    Some(serde_json::json!({
        "schema": SCHEMA_VERSION,
        "state": {"bell": {"a": a, "b": b, "dim": inp.total_dim()}},
        "resource": [b],
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn builtin_depolarizing() {
        let ch = parse_channel(&json!({"name": "depolarizing", "p": 0.5, "dims": 2})).unwrap();
        assert!(ch.tp_residual() < 1e-12);
        assert_eq!(ch.in_layout().labels(), vec!["A"]);
    }

    #[test]
    fn kraus_residual_is_named() {
        let e = parse_channel(&json!({
            "kraus": [[[[1.0005, 0], [0, 0]], [[0, 0], [1, 0]]]],
            "in_dims": [2], "out_dims": [2], "labels": {"in": ["A"], "out": ["B"]}
        }))
        .unwrap_err();
        let msg = e.to_string();
        assert!(msg.starts_with("kraus:"), "{msg}");
        assert!(msg.contains("1.0"), "{msg}");
    }

    #[test]
    fn bell_state_is_pure() {
        let s = parse_state(&json!({"schema": "1", "state": {"bell": {"a": "A", "b": "B'"}}})).unwrap();
        assert!((s.state.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let e = parse_state(&json!({"state": {"diagonal": {"layout": [["A", 2]], "probs": "x"}}})).unwrap_err();
        assert!(e.to_string().starts_with("state.diagonal.probs"), "{e}");
        let e = parse_channel(&json!({"schema": "2", "name": "identity", "dims": 2})).unwrap_err();
        assert!(e.to_string().starts_with("schema"), "{e}");
        let e = parse_channel(&json!({"name": "identity"})).unwrap_err();
        assert!(e.to_string().starts_with("dims"), "{e}");
    }

    #[test]
    fn declared_products_are_checked() {
        let doc = json!({
            "state": {"bell": {"a": "B'", "b": "C'"}},
            "products": [[["B'"], ["C'"]]]
        });
        let e = parse_state(&doc).unwrap_err();
        assert!(e.to_string().starts_with("products[0]"), "{e}");
    }

    #[test]
    fn classical_copy_and_cq_mac() {
        let s = parse_state(&json!({"state": {"classical_copy": {"labels": ["U", "X"], "probs": [0.25, 0.75]}}})).unwrap();
        assert!((s.state.matrix()[(3, 3)].re - 0.75).abs() < 1e-15);
        let ch = parse_channel(&json!({
            "cq": [
                {"basis": {"layout": [["C", 2]], "index": 0}},
                {"basis": {"layout": [["C", 2]], "index": 1}},
                {"basis": {"layout": [["C", 2]], "index": 1}},
                {"basis": {"layout": [["C", 2]], "index": 0}}
            ],
            "in_dims": [2, 2], "labels": {"in": ["X1", "X2"]}
        }))
        .unwrap();
        assert_eq!(ch.in_layout().total_dim(), 4);
    }

    #[test]
    fn shorthands() {
        let ch = parse_channel(&channel_shorthand("identity2").unwrap()).unwrap();
        let v = state_shorthand("bell", Some(&ch)).unwrap();
        let s = parse_state(&v).unwrap();
        assert_eq!(s.resource.unwrap(), vec!["B'".to_string()]);
        assert!(channel_shorthand("depolarizing2:0.3").is_some());
        assert!(channel_shorthand("bogus").is_none());
    }
}
