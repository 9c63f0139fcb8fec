//! Recipe-driven synthesis. A recipe names the target shape (spine or star
//! core), the entropy, and the summability interval of every exit; `build`
//! assembles the graph deterministically and, for the loop-removal variants,
//! also returns the transient companion.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphView;
use crate::spectrum::remove_ruette_loop;

use super::built::{AttachmentSpec, BuiltGraph, ScheduleEntry, Stage};
use super::intervals::{IntervalSpec, TripleRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    Rev1,
    Rev2,
    Intro1,
    Intro,
}

/// Number of infinite emitters a star-core recipe asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmitterCount {
    #[serde(rename = "inf")]
    Infinite,
    #[serde(untagged)]
    Finite(u32),
}

impl EmitterCount {
    fn as_option(self) -> Option<u32> {
        match self {
            EmitterCount::Infinite => None,
            EmitterCount::Finite(n) => Some(n),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructionRecipe {
    pub theorem: Theorem,
    pub h: f64,
    pub intervals: Vec<IntervalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitters: Option<EmitterCount>,
}

fn is_maximal(iv: &IntervalSpec, h: f64, lower_closed: bool) -> bool {
    iv.lower == h && iv.lower_closed == lower_closed && iv.upper.is_infinite()
}

/// Every point of `iv` must lie in [h, inf[ (or ]h, inf[ when strict).
fn check_subset(iv: &IntervalSpec, h: f64, strict: bool) -> bool {
    if iv.lower > h {
        return true;
    }
    if iv.lower < h {
        return false;
    }
    !strict || !iv.lower_closed
}

fn validate(recipe: &ConstructionRecipe) -> Result<()> {
    if !(recipe.h > 0.0 && recipe.h.is_finite()) {
        return Err(Error::RecipeInvalid("entropy must be in ]0, inf[".into()));
    }
    for iv in &recipe.intervals {
        iv.validate()?;
    }
    match recipe.theorem {
        Theorem::Rev1 | Theorem::Rev2 => {
            if recipe.emitters.is_some() {
                return Err(Error::RecipeInvalid(
                    "emitter count applies to star-core recipes only".into(),
                ));
            }
            let closed = recipe.theorem == Theorem::Rev2;
            if !recipe
                .intervals
                .iter()
                .any(|iv| is_maximal(iv, recipe.h, closed))
            {
                let shape = if closed { "[h, inf[" } else { "]h, inf[" };
                return Err(Error::RecipeInvalid(format!(
                    "spine recipes need the maximal interval {shape} among their intervals"
                )));
            }
        }
        Theorem::Intro1 | Theorem::Intro => {
            match recipe.emitters {
                None => {
                    return Err(Error::RecipeInvalid(
                        "star-core recipes need an emitter count".into(),
                    ))
                }
                Some(EmitterCount::Finite(0)) => {
                    return Err(Error::RecipeInvalid("emitter count must be >= 1".into()))
                }
                _ => {}
            }
            if recipe.intervals.is_empty() {
                return Err(Error::RecipeInvalid(
                    "star-core recipes need at least one interval".into(),
                ));
            }
            let strict = recipe.theorem == Theorem::Intro1;
            for iv in &recipe.intervals {
                if !check_subset(iv, recipe.h, strict) {
                    let bound = if strict { "]h, inf[" } else { "[h, inf[" };
                    return Err(Error::RecipeInvalid(format!(
                        "interval {iv} is not contained in {bound}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Spine graph with exit paths only (no return paths, no loops): the
/// row-finite attachment template, one copy per spec, contacting distinct
/// spine vertices.
pub fn attach_exit_rowfinite(h: f64, attachments: Vec<AttachmentSpec>) -> Result<GraphView> {
    let built = BuiltGraph::spine(h, attachments, Stage::Attached)?;
    Ok(GraphView::from_built(Arc::new(built), false))
}

/// Star-core graph with exit paths only; the core is already an infinite
/// emitter at this stage.
pub fn attach_exit_emitter(
    h: f64,
    emitters: Option<u32>,
    attachments: Vec<AttachmentSpec>,
) -> Result<GraphView> {
    let built = BuiltGraph::star_core(h, emitters, attachments, Stage::Attached)?;
    Ok(GraphView::from_built(Arc::new(built), false))
}

/// The return-path schedule of a completed recipe graph: for each exit-path
/// vertex w_k, the entry-path count a_k, the longest entry path l_k, and the
/// chosen return length n_k (strictly increasing with gaps > l_k).
pub fn schedule_return_paths(g: &GraphView, count: usize) -> Result<Vec<ScheduleEntry>> {
    let Some((built, _)) = g.built_parts() else {
        return Err(Error::Precondition(
            "return-path schedules exist on recipe graphs only".into(),
        ));
    };
    if built.stage() != Stage::Completed {
        return Err(Error::Precondition(
            "the graph has no return paths yet".into(),
        ));
    }
    built.schedule_prefix(count)
}

/// Assembles the recipe graph G and, for the loop-removal theorems, the
/// transient companion G' with the length-1 base loop dropped. Identical
/// recipes yield identical graphs.
pub fn build(recipe: &ConstructionRecipe) -> Result<(GraphView, Option<GraphView>)> {
    validate(recipe)?;
    let h = recipe.h;
    let g = match recipe.theorem {
        Theorem::Rev1 | Theorem::Rev2 => {
            let closed = recipe.theorem == Theorem::Rev2;
            // The maximal interval is carried by the backbone itself; every
            // other interval becomes an attachment on its own spine vertex.
            let mut skipped = false;
            let mut specs = Vec::new();
            for iv in &recipe.intervals {
                if !skipped && is_maximal(iv, h, closed) {
                    skipped = true;
                    continue;
                }
                specs.push(AttachmentSpec {
                    rule: TripleRule::Interval(*iv),
                    contact: specs.len() as u64 + 1,
                });
            }
            let built = BuiltGraph::spine(h, specs, Stage::Completed)?;
            GraphView::from_built(Arc::new(built), false)
        }
        Theorem::Intro1 | Theorem::Intro => {
            let specs = recipe
                .intervals
                .iter()
                .map(|iv| AttachmentSpec {
                    rule: TripleRule::Interval(*iv),
                    contact: 1,
                })
                .collect();
            let emitters = recipe.emitters.unwrap().as_option();
            let built = BuiltGraph::star_core(h, emitters, specs, Stage::Completed)?;
            GraphView::from_built(Arc::new(built), false)
        }
    };
    let companion = match recipe.theorem {
        Theorem::Rev2 | Theorem::Intro => Some(remove_ruette_loop(&g, 0)?),
        Theorem::Rev1 | Theorem::Intro1 => None,
    };
    Ok((g, companion))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lower: f64, upper: f64, lc: bool, uc: bool) -> IntervalSpec {
        IntervalSpec::new(lower, upper, lc, uc)
    }

    #[test]
    fn spine_recipes_demand_the_maximal_interval() {
        let h = std::f64::consts::LN_2;
        let r = ConstructionRecipe {
            theorem: Theorem::Rev1,
            h,
            intervals: vec![iv(h + 1.0, h + 2.0, true, true)],
            emitters: None,
        };
        let Err(err) = build(&r) else {
            panic!("expected a rejection")
        };
        assert!(matches!(err, Error::RecipeInvalid(_)), "{err:?}");
        // The closed-end variant rejects the open-end maximal interval too.
        let r2 = ConstructionRecipe {
            theorem: Theorem::Rev2,
            h,
            intervals: vec![iv(h, f64::INFINITY, false, false)],
            emitters: None,
        };
        assert!(matches!(build(&r2), Err(Error::RecipeInvalid(_))));
    }

    #[test]
    fn rev2_returns_both_graphs() {
        let h = std::f64::consts::LN_2;
        let r = ConstructionRecipe {
            theorem: Theorem::Rev2,
            h,
            intervals: vec![iv(h, f64::INFINITY, true, false), iv(h + 1.0, h + 2.0, true, true)],
            emitters: None,
        };
        let (g, gp) = build(&r).unwrap();
        let gp = gp.expect("loop-removal theorem yields a companion");
        assert_eq!(g.declared_exits.len(), 2);
        assert_eq!(gp.declared_exits.len(), 2);
        assert_eq!(g.declared_entropy, Some(h));
        assert!(!g.built_parts().unwrap().1);
        assert!(gp.built_parts().unwrap().1);
    }

    #[test]
    fn intro1_star_core_has_requested_emitters() {
        let h = std::f64::consts::LN_2;
        let r = ConstructionRecipe {
            theorem: Theorem::Intro1,
            h,
            intervals: vec![iv(h + 1.0, h + 2.0, false, false)],
            emitters: Some(EmitterCount::Finite(2)),
        };
        let (g, gp) = build(&r).unwrap();
        assert!(gp.is_none());
        assert_eq!(g.declared_exits.len(), 1);
        let (built, _) = g.built_parts().unwrap();
        let ws = built.emitter_vertices(8).unwrap();
        assert_eq!(ws.len(), 2);
        for w in ws {
            assert!(built.is_declared_emitter(w));
        }
    }

    #[test]
    fn intro1_rejects_interval_touching_the_entropy() {
        let h = std::f64::consts::LN_2;
        let r = ConstructionRecipe {
            theorem: Theorem::Intro1,
            h,
            intervals: vec![iv(h, h + 1.0, true, true)],
            emitters: Some(EmitterCount::Finite(1)),
        };
        assert!(matches!(build(&r), Err(Error::RecipeInvalid(_))));
        // The closed-end theorem accepts the same interval.
        let r2 = ConstructionRecipe {
            theorem: Theorem::Intro,
            h,
            intervals: vec![iv(h, h + 1.0, true, true)],
            emitters: Some(EmitterCount::Finite(1)),
        };
        let (_, gp) = build(&r2).unwrap();
        assert!(gp.is_some());
    }

    #[test]
    fn identical_recipes_build_identical_prefixes() {
        let h = std::f64::consts::LN_2;
        let mk = || {
            let r = ConstructionRecipe {
                theorem: Theorem::Rev2,
                h,
                intervals: vec![
                    iv(h, f64::INFINITY, true, false),
                    iv(h + 1.0, h + 2.0, true, true),
                ],
                emitters: None,
            };
            build(&r).unwrap().0
        };
        let g1 = mk();
        let g2 = mk();
        for v in 0..25 {
            let (b1, c1) = g1.out_bundles(v, 16).unwrap();
            let (b2, c2) = g2.out_bundles(v, 16).unwrap();
            assert_eq!(c1, c2);
            assert_eq!(b1, b2, "vertex {v}");
        }
    }

    #[test]
    fn attached_stage_wrappers_and_schedule() {
        let h = std::f64::consts::LN_2;
        let spec = AttachmentSpec {
            rule: TripleRule::AllOnes,
            contact: 1,
        };
        let g = attach_exit_rowfinite(h, vec![spec.clone()]).unwrap();
        assert!(schedule_return_paths(&g, 2).is_err());
        let star = attach_exit_emitter(h, Some(3), vec![spec]).unwrap();
        assert_eq!(star.declared_exits.len(), 1);
        let r = ConstructionRecipe {
            theorem: Theorem::Rev1,
            h,
            intervals: vec![
                iv(h, f64::INFINITY, false, false),
                iv(h + 1.0, h + 2.0, true, true),
            ],
            emitters: None,
        };
        let (g, _) = build(&r).unwrap();
        let sched = schedule_return_paths(&g, 3).unwrap();
        assert!(sched.windows(2).all(|w| w[1].n_k > w[0].n_k + w[0].l_k));
    }
}
