//! The `bct-tree/1` JSON document for tree models.
//!
//! ```json
//! {
//!   "schema": "bct-tree/1",
//!   "m": 2,
//!   "labels": ["0", "1"],
//!   "root": {"symbol": null, "children": [
//!     {"symbol": "0", "children": [], "counts": [3, 1], "theta": [0.7, 0.3]},
//!     {"symbol": "1", "children": []}
//!   ]},
//!   "annotations": {"log_posterior": -0.69}
//! }
//! ```
//!
//! Children appear in symbol order; a node has either no children or all
//! `m` of them. The path from the root to a node spells its context, most
//! recent symbol first. Non-finite numbers are written as the strings
//! `"inf"`, `"-inf"` and `"nan"`.

use bct_core::alphabet::Alphabet;
use bct_core::count_tree::CountTree;
use bct_core::error::{BctError, Result};
use bct_core::likelihood::ParamSet;
use bct_core::model::{Context, TreeModel};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

pub const SCHEMA: &str = "bct-tree/1";

/// Optional data attached to a serialized tree.
#[derive(Default)]
pub struct Annotations<'a> {
    /// Writes the count vector at every node.
    pub counts: Option<&'a CountTree>,
    /// Writes `θ` at the leaves it covers.
    pub theta: Option<&'a ParamSet>,
    /// Top-level `annotations` object.
    pub summary: Map<String, Value>,
}

/// A parsed document.
#[derive(Clone, Debug)]
pub struct TreeDocument {
    pub model: TreeModel,
    pub labels: Vec<String>,
    /// Present only when every leaf carries a `theta` vector.
    pub theta: Option<ParamSet>,
    pub annotations: Map<String, Value>,
}

/// JSON number, or a string for non-finite values.
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn tree_value(model: &TreeModel, alphabet: &Alphabet, notes: &Annotations) -> Value {
    let mut root = Map::new();
    root.insert("schema".into(), json!(SCHEMA));
    root.insert("m".into(), json!(model.m()));
    root.insert("labels".into(), json!(alphabet.labels()));
    root.insert(
        "root".into(),
        node_value(model, alphabet, notes, &mut Vec::new()),
    );
    if !notes.summary.is_empty() {
        root.insert("annotations".into(), Value::Object(notes.summary.clone()));
    }
    Value::Object(root)
}

pub fn serialize_tree(model: &TreeModel, alphabet: &Alphabet, notes: &Annotations) -> String {
    serde_json::to_string_pretty(&tree_value(model, alphabet, notes))
        .expect("JSON values always serialize")
}

fn node_value(
    model: &TreeModel,
    alphabet: &Alphabet,
    notes: &Annotations,
    ctx: &mut Context,
) -> Value {
    let mut node = Map::new();
    node.insert(
        "symbol".into(),
        ctx.last()
            .map_or(Value::Null, |&s| json!(alphabet.label(s))),
    );
    let leaf = model.contains_leaf(ctx);
    let children: Vec<Value> = if leaf {
        Vec::new()
    } else {
        (0..model.m())
            .map(|j| {
                ctx.push(j as u8);
                let v = node_value(model, alphabet, notes, ctx);
                ctx.pop();
                v
            })
            .collect()
    };
    node.insert("children".into(), Value::Array(children));
    if let Some(tree) = notes.counts {
        if ctx.len() <= tree.max_depth() {
            node.insert("counts".into(), json!(tree.counts_at(ctx).0));
        }
    }
    if let Some(theta) = notes.theta.filter(|_| leaf).and_then(|t| t.get(ctx)) {
        node.insert(
            "theta".into(),
            Value::Array(theta.iter().map(|&p| number(p)).collect()),
        );
    }
    Value::Object(node)
}

fn err(location: &str, message: impl Into<String>) -> BctError {
    BctError::TreeFormat {
        location: location.to_string(),
        message: message.into(),
    }
}

/// Parses a document and returns just its model.
pub fn parse_tree(text: &str) -> Result<TreeModel> {
    parse_document(text).map(|d| d.model)
}

pub fn parse_document(text: &str) -> Result<TreeDocument> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = Value::deserialize(&mut de)
        .and_then(|v| de.end().map(|_| v))
        .map_err(|e| {
            err(
                &format!("line {}, column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
    let obj = value
        .as_object()
        .ok_or_else(|| err("$", "expected an object"))?;
    match obj.get("schema") {
        Some(Value::String(s)) if s == SCHEMA => {}
        Some(other) => {
            return Err(err(
                "$.schema",
                format!("expected \"{SCHEMA}\", got {other}"),
            ))
        }
        None => return Err(err("$.schema", "missing")),
    }
    let m = obj
        .get("m")
        .and_then(Value::as_u64)
        .filter(|&m| (2..=256).contains(&m))
        .ok_or_else(|| err("$.m", "expected an integer between 2 and 256"))? as usize;
    let labels: Vec<String> = match obj.get("labels") {
        None => (0..m).map(|i| i.to_string()).collect(),
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| err(&format!("$.labels[{i}]"), "expected a string"))
            })
            .collect::<Result<_>>()?,
        Some(_) => return Err(err("$.labels", "expected an array of strings")),
    };
    if labels.len() != m {
        return Err(err(
            "$.labels",
            format!("expected {m} labels, got {}", labels.len()),
        ));
    }
    let annotations = match obj.get("annotations") {
        None => Map::new(),
        Some(Value::Object(a)) => a.clone(),
        Some(_) => return Err(err("$.annotations", "expected an object")),
    };
    let root = obj.get("root").ok_or_else(|| err("$.root", "missing"))?;

    let mut walk = Walk {
        m,
        labels: &labels,
        leaves: Vec::new(),
        theta: BTreeMap::new(),
        all_theta: true,
    };
    walk.node(root, "$.root", &mut Vec::new())?;
    let model = TreeModel::from_leaves(m, walk.leaves).map_err(|e| err("$.root", e.to_string()))?;
    let theta = if walk.all_theta {
        Some(ParamSet::new(m, walk.theta).map_err(|e| err("$.root", e.to_string()))?)
    } else {
        None
    };
    Ok(TreeDocument {
        model,
        labels,
        theta,
        annotations,
    })
}

struct Walk<'a> {
    m: usize,
    labels: &'a [String],
    leaves: Vec<Context>,
    theta: BTreeMap<Context, Vec<f64>>,
    all_theta: bool,
}

impl Walk<'_> {
    fn node(&mut self, v: &Value, path: &str, ctx: &mut Context) -> Result<()> {
        let obj = v
            .as_object()
            .ok_or_else(|| err(path, "expected a node object"))?;
        let expected = ctx.last().map(|&s| self.labels[s as usize].as_str());
        match (obj.get("symbol"), expected) {
            (None | Some(Value::Null), None) => {}
            (Some(Value::String(s)), Some(e)) if s == e => {}
            (got, e) => {
                let want = e.map_or("null".to_string(), |e| format!("{e:?}"));
                let got = got.map_or("nothing".to_string(), Value::to_string);
                return Err(err(
                    &format!("{path}.symbol"),
                    format!("expected {want}, got {got}"),
                ));
            }
        }
        let children = match obj.get("children") {
            Some(Value::Array(c)) => c,
            _ => return Err(err(&format!("{path}.children"), "expected an array")),
        };
        if children.is_empty() {
            match obj.get("theta") {
                Some(t) => {
                    let loc = format!("{path}.theta");
                    let arr = t
                        .as_array()
                        .ok_or_else(|| err(&loc, "expected an array of numbers"))?;
                    let probs = arr
                        .iter()
                        .enumerate()
                        .map(|(i, x)| {
                            parse_number(x)
                                .ok_or_else(|| err(&format!("{loc}[{i}]"), "expected a number"))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    self.theta.insert(ctx.clone(), probs);
                }
                None => self.all_theta = false,
            }
            self.leaves.push(ctx.clone());
            return Ok(());
        }
        if children.len() != self.m {
            return Err(err(
                &format!("{path}.children"),
                format!(
                    "an internal node needs exactly {} children, got {}",
                    self.m,
                    children.len()
                ),
            ));
        }
        for (j, c) in children.iter().enumerate() {
            ctx.push(j as u8);
            self.node(c, &format!("{path}.children[{j}]"), ctx)?;
            ctx.pop();
        }
        Ok(())
    }
}

/// Accepts numbers and the strings written by [`number`].
pub fn parse_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin() -> Alphabet {
        Alphabet::numeric(2).unwrap()
    }

    #[test]
    fn root_model_is_a_single_leaf() {
        let text = serialize_tree(&TreeModel::root(2), &bin(), &Annotations::default());
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["root"]["children"], json!([]));
        assert_eq!(v["root"]["symbol"], Value::Null);
        assert_eq!(parse_tree(&text).unwrap(), TreeModel::root(2));
    }

    #[test]
    fn round_trip_with_theta() {
        let model = TreeModel::from_leaves(2, [vec![0], vec![1, 0], vec![1, 1]]).unwrap();
        let theta = ParamSet::from_pairs(
            2,
            [
                (vec![0], vec![0.25, 0.75]),
                (vec![1, 0], vec![0.1, 0.9]),
                (vec![1, 1], vec![1.0 / 3.0, 2.0 / 3.0]),
            ],
        )
        .unwrap();
        let notes = Annotations {
            theta: Some(&theta),
            ..Default::default()
        };
        let doc = parse_document(&serialize_tree(&model, &bin(), &notes)).unwrap();
        assert_eq!(doc.model, model);
        assert_eq!(doc.theta.unwrap(), theta);
    }

    #[test]
    fn errors_carry_locations() {
        let bad_symbol = r#"{"schema":"bct-tree/1","m":2,"root":{"children":[
            {"symbol":"0","children":[]},{"symbol":"0","children":[]}]}}"#;
        let e = parse_tree(bad_symbol).unwrap_err().to_string();
        assert!(e.contains("$.root.children[1].symbol"), "{e}");

        let short = r#"{"schema":"bct-tree/1","m":3,"root":{"children":[{"children":[]}]}}"#;
        assert!(parse_tree(short)
            .unwrap_err()
            .to_string()
            .contains("$.root.children"));

        let e = parse_tree(r#"{"schema":"bct-tree/1","m":2,"root":"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 1"), "{e}");

        assert!(parse_tree(r#"{"schema":"other","m":2,"root":{"children":[]}}"#).is_err());
    }

    #[test]
    fn non_finite_numbers() {
        assert_eq!(number(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(parse_number(&json!("-inf")), Some(f64::NEG_INFINITY));
        assert_eq!(parse_number(&number(-1.5)), Some(-1.5));
    }

    #[test]
    fn deep_trees_parse() {
        let leaves: Vec<Context> = (0..150)
            .map(|k| [vec![1u8; k], vec![0]].concat())
            .chain([vec![1u8; 150]])
            .collect();
        let model = TreeModel::from_leaves(2, leaves).unwrap();
        let text = serialize_tree(&model, &bin(), &Annotations::default());
        assert_eq!(parse_tree(&text).unwrap(), model);
    }
}
