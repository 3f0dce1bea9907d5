//! Deterministic rule-table backend: a pure function of the request,
//! region summaries, and database summaries.

use super::{
    EntrySummary, ProxyChoice, ReasonerBackend, SlabSummary, TaskPlan, TaskRequest,
};
use crate::affordance::SubpartRole;
use crate::error::Result;

pub struct RuleBackend;

/// Part vocabulary of an object, ordered functional end -> grasp end, and
/// whether the functional end carries more surface points than the grasp
/// end (heads and bowls do, screwdriver tips do not).
struct ObjectVocab {
    parts: [&'static str; 3],
    functional_end_heavier: bool,
}

/// Ordered part vocabulary of an object (functional end first).
pub fn part_vocabulary(object: &str) -> Vec<String> {
    object_vocab(object)
        .parts
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn object_vocab(object: &str) -> ObjectVocab {
    match object.to_lowercase().as_str() {
        "hammer" | "mallet" => ObjectVocab {
            parts: ["head", "neck", "handle"],
            functional_end_heavier: true,
        },
        "screwdriver" | "drill" => ObjectVocab {
            parts: ["tip", "shaft", "handle"],
            functional_end_heavier: false,
        },
        "knife" => ObjectVocab {
            parts: ["blade", "bolster", "handle"],
            functional_end_heavier: false,
        },
        "scissors" => ObjectVocab {
            parts: ["blade", "pivot", "handle"],
            functional_end_heavier: false,
        },
        "spoon" | "ladle" | "spatula" => ObjectVocab {
            parts: ["bowl", "neck", "handle"],
            functional_end_heavier: true,
        },
        "flashlight" => ObjectVocab {
            parts: ["head", "barrel", "tail"],
            functional_end_heavier: true,
        },
        "mug" | "cup" => ObjectVocab {
            parts: ["body", "wall", "handle"],
            functional_end_heavier: true,
        },
        "pan" | "pot" => ObjectVocab {
            parts: ["body", "rim", "handle"],
            functional_end_heavier: true,
        },
        "bottle" => ObjectVocab {
            parts: ["cap", "neck", "body"],
            functional_end_heavier: false,
        },
        "rod" => ObjectVocab {
            parts: ["head", "middle", "handle"],
            functional_end_heavier: true,
        },
        _ => ObjectVocab {
            parts: ["functional end", "middle", "handle"],
            functional_end_heavier: true,
        },
    }
}

/// Category grouping for cross-object affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Striker,
    Driver,
    Cutter,
    Scooper,
    Vessel,
    Cookware,
    Torch,
    Generic,
}

fn category(object: &str) -> Category {
    match object.to_lowercase().as_str() {
        "hammer" | "mallet" => Category::Striker,
        "screwdriver" | "drill" => Category::Driver,
        "knife" | "scissors" => Category::Cutter,
        "spoon" | "ladle" | "spatula" => Category::Scooper,
        "mug" | "cup" | "bottle" | "glass" => Category::Vessel,
        "pan" | "pot" => Category::Cookware,
        "flashlight" => Category::Torch,
        _ => Category::Generic,
    }
}

fn object_affinity(a: &str, b: &str) -> f64 {
    if a.eq_ignore_ascii_case(b) {
        return 1.0;
    }
    let (ca, cb) = (category(a), category(b));
    if ca == cb && ca != Category::Generic {
        return 0.8;
    }
    use Category::*;
    let pair = |x: Category, y: Category| (ca == x && cb == y) || (ca == y && cb == x);
    if pair(Striker, Driver) {
        0.7
    } else if pair(Driver, Cutter) {
        0.6
    } else if pair(Striker, Cutter) || pair(Vessel, Cookware) {
        0.5
    } else if pair(Cutter, Scooper) || pair(Scooper, Cookware) || pair(Torch, Driver) || pair(Torch, Striker) {
        0.4
    } else if pair(Striker, Scooper) || pair(Driver, Scooper) {
        0.3
    } else {
        0.2
    }
}

fn task_affinity(a: &str, b: &str) -> f64 {
    if a.eq_ignore_ascii_case(b) {
        return 1.0;
    }
    let key = {
        let (x, y) = (a.to_lowercase(), b.to_lowercase());
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    };
    match (key.0.as_str(), key.1.as_str()) {
        ("hammer", "screw") => 0.6,
        ("cut", "screw") | ("cut", "hammer") => 0.4,
        ("cook", "stir") | ("scoop", "stir") => 0.5,
        ("drink", "pour") => 0.7,
        ("cook", "drink") => 0.2,
        _ => 0.0,
    }
}

impl ReasonerBackend for RuleBackend {
    fn name(&self) -> &'static str {
        "rule"
    }

    fn plan_task(&self, request: &TaskRequest) -> Result<TaskPlan> {
        let vocab = object_vocab(&request.object_name);
        let key = (
            request.object_name.to_lowercase(),
            request.task.to_lowercase(),
        );
        let (grasp, free, why): (&str, &str, &str) = match (key.0.as_str(), key.1.as_str()) {
            ("hammer", "hammer") => ("head", "handle", "present the handle for striking"),
            ("screwdriver", "screw") => ("shaft", "handle", "present the handle for turning"),
            ("screwdriver", "hammer") => ("shaft", "handle", "present the handle end for striking"),
            ("mug", "drink") => ("body", "handle", "keep the handle free for drinking"),
            ("pan", "cook") => ("body", "handle", "keep the handle free for cooking"),
            ("bottle", "drink") => ("neck", "body", "hand over the body for drinking"),
            ("bottle", "pour") => ("neck", "body", "hand over the body for pouring"),
            ("knife", "cut") => ("blade", "handle", "present the handle for cutting"),
            ("scissors", "cut") => ("blade", "handle", "present the handles for cutting"),
            ("spoon", "stir") => ("bowl", "handle", "present the handle for stirring"),
            ("spoon", "scoop") => ("bowl", "handle", "present the handle for scooping"),
            ("flashlight", "illuminate") | ("flashlight", "light") => {
                ("head", "barrel", "present the barrel for holding")
            }
            _ => {
                log::warn!(
                    "no rule-table plan for ({}, {}); using the functional-end default",
                    request.object_name,
                    request.task
                );
                (
                    vocab.parts[0],
                    vocab.parts[2],
                    "default: grasp the working end, keep the handle free",
                )
            }
        };
        Ok(TaskPlan {
            grasp_part: grasp.to_string(),
            free_part: free.to_string(),
            rationale: why.to_string(),
        })
    }

    fn label_regions(&self, request: &TaskRequest, slabs: &[SlabSummary]) -> Result<Vec<String>> {
        let vocab = object_vocab(&request.object_name);
        let r = slabs.len();
        if r == 1 {
            // degenerate split: the single region is the part the robot grasps
            return Ok(vec![self.plan_task(request)?.grasp_part]);
        }
        // orient by slab mass: the heavier end slab is the functional end
        // for head-heavy objects, the grasp end otherwise
        let first_heavier = slabs[0].point_count >= slabs[r - 1].point_count;
        let functional_first = first_heavier == vocab.functional_end_heavier;
        let mut labels = vec![vocab.parts[1].to_string(); r];
        if functional_first {
            labels[0] = vocab.parts[0].to_string();
            labels[r - 1] = vocab.parts[2].to_string();
        } else {
            labels[0] = vocab.parts[2].to_string();
            labels[r - 1] = vocab.parts[0].to_string();
        }
        Ok(labels)
    }

    fn choose_proxy(
        &self,
        request: &TaskRequest,
        labels: &[String],
        entries: &[EntrySummary],
    ) -> Result<ProxyChoice> {
        let query_parts: Vec<String> = {
            let mut seen = Vec::new();
            for l in labels {
                if !seen.contains(l) {
                    seen.push(l.clone());
                }
            }
            seen
        };

        let mut best: Option<(f64, usize)> = None;
        let mut any_overlap = false;
        for (idx, entry) in entries.iter().enumerate() {
            if !entry
                .subparts
                .iter()
                .any(|(_, role)| *role == SubpartRole::GraspSide)
            {
                continue; // unusable as an affordance source
            }
            let overlap = query_parts
                .iter()
                .filter(|q| entry.subparts.iter().any(|(n, _)| n.eq_ignore_ascii_case(q)))
                .count();
            if overlap > 0 {
                any_overlap = true;
            }
            let score = 2.0 * object_affinity(&request.object_name, &entry.object_class)
                + task_affinity(&request.task, &entry.task)
                + 0.5 * overlap as f64 / query_parts.len().max(1) as f64;
            // strictly-greater keeps the earliest entry on ties
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, idx));
            }
        }
        if !any_overlap {
            return Err(crate::error::Error::NoViableProxy);
        }
        let (_, proxy_idx) = best.expect("database non-empty");
        let entry = &entries[proxy_idx];

        // pair construction: the human-side (free) part maps to the proxy's
        // grasp-side subpart, the robot-side (grasp) part to the proxy's
        // function-side subpart, then exact-name matches for the rest.
        let plan = self.plan_task(request)?;
        let side = |role: SubpartRole| {
            entry
                .subparts
                .iter()
                .find(|(_, r)| *r == role)
                .map(|(n, _)| n.clone())
        };
        let mut pairs: Vec<(String, String)> = Vec::new();
        let push_pair = |q: &str, p: Option<String>, pairs: &mut Vec<(String, String)>| {
            let Some(p) = p else { return };
            if !query_parts.iter().any(|l| l == q) {
                return;
            }
            if pairs.iter().any(|(a, b)| a == q || b == &p) {
                return;
            }
            pairs.push((q.to_string(), p));
        };
        push_pair(&plan.free_part, side(SubpartRole::GraspSide), &mut pairs);
        push_pair(&plan.grasp_part, side(SubpartRole::FunctionSide), &mut pairs);
        for q in &query_parts {
            let exact = entry
                .subparts
                .iter()
                .find(|(n, _)| n.eq_ignore_ascii_case(q))
                .map(|(n, _)| n.clone());
            push_pair(q, exact, &mut pairs);
        }
        Ok(ProxyChoice {
            entry_index: proxy_idx,
            pairs,
        })
    }
}
