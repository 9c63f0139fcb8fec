//! The KGD file format: a small JSON container for countable weighted
//! digraphs. Version 1 carries either a fully explicit finite graph or a
//! construction recipe (plus a few named builtin graphs); recipes re-expand
//! deterministically, so a KGD file pins the graph bit for bit.

use serde::{Deserialize, Serialize};

use crate::construct::{build, ConstructionRecipe, EmitterCount, Theorem};
use crate::construct::intervals::IntervalSpec;
use crate::error::{Error, Result};
use crate::graph::{EdgeBundle, ExitSpec, ExplicitGraph, FamilyKind, GraphView, VertexId};

pub const KGD_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KgdVertex {
    pub id: VertexId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub emitter: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RecipeParams {
    pub h: f64,
    #[serde(default)]
    pub intervals: Vec<IntervalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitters: Option<EmitterCount>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KgdGraph {
    Explicit {
        vertices: Vec<KgdVertex>,
        bundles: Vec<EdgeBundle>,
    },
    Recipe {
        theorem: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<RecipeParams>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KgdDocument {
    pub version: u32,
    pub graph: KgdGraph,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub declared_exits: Vec<ExitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_entropy: Option<f64>,
}

/// A document realized into graphs: the primary graph and, for loop-removal
/// recipes, the transient companion.
pub struct Realized {
    pub graph: GraphView,
    pub companion: Option<GraphView>,
}

/// Two-vertex graph with power-law self-loop families (weights j^{-beta},
/// j >= 2) and unit connectors both ways; critical point between 1.73 and 2.
pub fn power_law_pair() -> GraphView {
    let mut g = ExplicitGraph::new(2);
    g.set_label(0, "v");
    g.set_label(1, "w");
    for v in 0..2 {
        g.add_bundle(EdgeBundle {
            src: v,
            dst: v,
            family: FamilyKind::PowerLaw { offset: 2 },
        });
        g.declare_emitter(v);
    }
    g.add_edge(0, 1, 1, 1.0);
    g.add_edge(1, 0, 1, 1.0);
    GraphView::from_explicit(g)
}

/// Single vertex with two unit self-loops; recurrent exactly at beta = log 2.
pub fn two_loops() -> GraphView {
    let mut g = ExplicitGraph::new(1);
    g.set_label(0, "v");
    g.add_edge(0, 0, 2, 1.0);
    GraphView::from_explicit(g)
}

fn theorem_of(name: &str) -> Option<Theorem> {
    match name {
        "rev1" => Some(Theorem::Rev1),
        "rev2" => Some(Theorem::Rev2),
        "intro1" => Some(Theorem::Intro1),
        "intro" => Some(Theorem::Intro),
        _ => None,
    }
}

impl KgdDocument {
    pub fn from_recipe(recipe: &ConstructionRecipe) -> KgdDocument {
        let theorem = match recipe.theorem {
            Theorem::Rev1 => "rev1",
            Theorem::Rev2 => "rev2",
            Theorem::Intro1 => "intro1",
            Theorem::Intro => "intro",
        };
        KgdDocument {
            version: KGD_VERSION,
            graph: KgdGraph::Recipe {
                theorem: theorem.into(),
                params: Some(RecipeParams {
                    h: recipe.h,
                    intervals: recipe.intervals.clone(),
                    emitters: recipe.emitters,
                }),
            },
            declared_exits: Vec::new(),
            declared_entropy: None,
        }
    }

    pub fn from_graph(g: &GraphView) -> Result<KgdDocument> {
        let fin = g.as_finite().map_err(|_| {
            Error::Precondition(
                "only finite explicit graphs serialize directly; infinite graphs need a recipe"
                    .into(),
            )
        })?;
        let vertices = (0..fin.len() as VertexId)
            .map(|v| KgdVertex {
                id: v,
                label: fin.label(v).map(str::to_owned),
                emitter: fin.is_declared_emitter(v),
            })
            .collect();
        Ok(KgdDocument {
            version: KGD_VERSION,
            graph: KgdGraph::Explicit {
                vertices,
                bundles: fin.all_bundles().cloned().collect(),
            },
            declared_exits: g.declared_exits.clone(),
            declared_entropy: g.declared_entropy,
        })
    }

    pub fn builtin(name: &str) -> Result<KgdDocument> {
        match name {
            "exx1" | "backbone" | "twoloops" => Ok(KgdDocument {
                version: KGD_VERSION,
                graph: KgdGraph::Recipe {
                    theorem: name.into(),
                    params: None,
                },
                declared_exits: Vec::new(),
                declared_entropy: None,
            }),
            _ => Err(Error::Parse(format!("unknown builtin graph '{name}'"))),
        }
    }

    pub fn parse(text: &str) -> Result<KgdDocument> {
        let doc: KgdDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.version != KGD_VERSION {
            return Err(Error::Parse(format!(
                "unsupported KGD version {}",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn to_string_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn realize(&self) -> Result<Realized> {
        match &self.graph {
            KgdGraph::Explicit { vertices, bundles } => {
                let n = vertices
                    .iter()
                    .map(|v| v.id as usize + 1)
                    .max()
                    .unwrap_or(0);
                let mut g = ExplicitGraph::new(n);
                for v in vertices {
                    if let Some(l) = &v.label {
                        g.set_label(v.id, l);
                    }
                    if v.emitter {
                        g.declare_emitter(v.id);
                    }
                }
                for b in bundles {
                    if b.src as usize >= n || b.dst as usize >= n {
                        return Err(Error::Parse(format!(
                            "bundle {} -> {} references an undeclared vertex",
                            b.src, b.dst
                        )));
                    }
                    g.add_bundle(b.clone());
                }
                let mut view = GraphView::from_explicit(g);
                view.declared_exits = self.declared_exits.clone();
                view.declared_entropy = self.declared_entropy;
                Ok(Realized {
                    graph: view,
                    companion: None,
                })
            }
            KgdGraph::Recipe { theorem, params } => match (theorem.as_str(), params) {
                ("exx1", _) => Ok(Realized {
                    graph: power_law_pair(),
                    companion: None,
                }),
                ("twoloops", _) => Ok(Realized {
                    graph: two_loops(),
                    companion: None,
                }),
                ("backbone", _) => Ok(Realized {
                    graph: GraphView::backbone(),
                    companion: None,
                }),
                (name, Some(p)) => {
                    let Some(theorem) = theorem_of(name) else {
                        return Err(Error::Parse(format!("unknown recipe theorem '{name}'")));
                    };
                    let recipe = ConstructionRecipe {
                        theorem,
                        h: p.h,
                        intervals: p.intervals.clone(),
                        emitters: p.emitters,
                    };
                    let (g, companion) = build(&recipe)?;
                    Ok(Realized {
                        graph: g,
                        companion,
                    })
                }
                (name, None) => Err(Error::Parse(format!(
                    "recipe '{name}' needs a params object"
                ))),
            },
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering of a finite truncation. Edge labels carry the bundle
/// multiplicity and, when it differs from 1, the F-value; vertices cut open
/// by the truncation are drawn dashed.
pub fn to_dot(g: &GraphView, depth: usize, width: usize) -> Result<String> {
    if depth == 0 || width == 0 {
        return Err(Error::Precondition(
            "truncation depth and width must be >= 1".into(),
        ));
    }
    let t = g.truncate(depth, width)?;
    let fin = &t.graph;
    let mut out = String::from("digraph g {\n  rankdir=LR;\n");
    for v in 0..fin.len() as VertexId {
        let name = fin
            .label(v)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("v{v}"));
        let style = if fin.is_complete(v) { "" } else { ", style=dashed" };
        out.push_str(&format!(
            "  n{v} [label=\"{}\"{}];\n",
            dot_escape(&name),
            style
        ));
    }
    for b in fin.all_bundles() {
        let FamilyKind::Finite { count, f } = b.family else {
            unreachable!("truncations expand infinite families");
        };
        let label = if f == 1.0 {
            format!("{count}")
        } else {
            format!("{count} (F={f})")
        };
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\"];\n",
            b.src, b.dst, label
        ));
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_round_trip() {
        let g = two_loops();
        let doc = KgdDocument::from_graph(&g).unwrap();
        let text = doc.to_string_pretty().unwrap();
        let doc2 = KgdDocument::parse(&text).unwrap();
        assert_eq!(doc, doc2);
        let realized = doc2.realize().unwrap();
        let fin = realized.graph.as_finite().unwrap();
        assert_eq!(fin.len(), 1);
        assert_eq!(fin.bundles(0).len(), 1);
    }

    #[test]
    fn finite_family_serializes_with_uppercase_f() {
        let doc = KgdDocument::from_graph(&two_loops()).unwrap();
        let text = doc.to_string_pretty().unwrap();
        assert!(text.contains("\"F\": 1.0"), "{text}");
        assert!(text.contains("\"kind\": \"finite\""));
    }

    #[test]
    fn recipe_round_trip_is_bit_identical() {
        let h = std::f64::consts::LN_2;
        let recipe = ConstructionRecipe {
            theorem: Theorem::Rev2,
            h,
            intervals: vec![
                IntervalSpec::new(h, f64::INFINITY, true, false),
                IntervalSpec::new(h + 1.0, h + 2.0, true, true),
            ],
            emitters: None,
        };
        let text = KgdDocument::from_recipe(&recipe)
            .to_string_pretty()
            .unwrap();
        let doc = KgdDocument::parse(&text).unwrap();
        assert_eq!(doc.to_string_pretty().unwrap(), text);
        let realized = doc.realize().unwrap();
        assert!(realized.companion.is_some());
        assert_eq!(realized.graph.declared_exits.len(), 2);
    }

    #[test]
    fn builtins_realize() {
        for name in ["exx1", "backbone", "twoloops"] {
            let doc = KgdDocument::builtin(name).unwrap();
            let text = doc.to_string_pretty().unwrap();
            let r = KgdDocument::parse(&text).unwrap().realize().unwrap();
            assert!(r.graph.has_vertex(0));
        }
        assert!(KgdDocument::builtin("nope").is_err());
    }

    #[test]
    fn dot_of_backbone_is_a_chain() {
        let dot = to_dot(&GraphView::backbone(), 4, 8).unwrap();
        assert_eq!(dot.matches("->").count(), 3);
        for i in 0..3 {
            assert!(dot.contains(&format!("n{} -> n{}", i, i + 1)));
        }
        assert!(to_dot(&GraphView::backbone(), 4, 0).is_err());
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        assert!(matches!(
            KgdDocument::parse("{\"version\": 3}"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(KgdDocument::parse("not json"), Err(Error::Parse(_))));
    }
}
