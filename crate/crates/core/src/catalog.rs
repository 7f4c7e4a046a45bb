//! Assessment catalog: process areas, specific goals and the practices they
//! contain, each recast as a user story.
//!
//! The catalog is user-authored data loaded from a single JSON document. A
//! sample built from a handful of well-known practices ships with the crate
//! (see [`sample`]), but nothing here assumes a particular model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SAMPLE_CATALOG: &str = include_str!("../fixtures/sample_catalog.json");

/// Lowest and highest maturity level a story may be tagged with.
pub const MIN_LEVEL: u8 = 2;
pub const MAX_LEVEL: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub title: String,
    pub version: String,
    pub process_areas: Vec<ProcessArea>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessArea {
    pub id: String,
    pub name: String,
    /// Read out when the area is introduced.
    pub intent: String,
    pub goals: Vec<SpecificGoal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecificGoal {
    pub id: String,
    pub statement: String,
    pub stories: Vec<StoryCard>,
}

/// A specific practice expressed as a user story.
///
/// `article` and `connector` are optional rendering hints. They default to
/// `"a"` and `"so"`; an empty string drops the word entirely, which is how
/// stories such as "As developers we ..." are expressed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryCard {
    pub id: String,
    pub model_ref: String,
    pub level: u8,
    pub cmmi_text: String,
    pub role: String,
    pub pronoun: String,
    pub practice_instance: String,
    pub benefit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connector: Option<String>,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog is not a valid document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog has {} violation(s):\n{}", .0.len(), Violations(.0))]
    Invalid(Vec<Violation>),
}

/// One violated invariant, with a JSON-path-like pointer to the element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Violations<'a>(&'a [Violation]);

impl fmt::Display for Violations<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {v}")?;
        }
        Ok(())
    }
}

impl CatalogError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            CatalogError::Invalid(v) => v,
            CatalogError::Parse(_) => &[],
        }
    }
}

/// Parses and validates a catalog document.
pub fn load_catalog(source: &str) -> Result<Catalog, CatalogError> {
    let catalog: Catalog = serde_json::from_str(source)?;
    catalog.validate()?;
    Ok(catalog)
}

/// The catalog shipped with the crate: nine practices across nine areas.
pub fn sample() -> Catalog {
    load_catalog(SAMPLE_CATALOG).expect("shipped sample catalog is valid")
}

pub fn sample_source() -> &'static str {
    SAMPLE_CATALOG
}

impl Catalog {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut violations = Vec::new();
        let mut area_ids: HashMap<&str, String> = HashMap::new();
        let mut story_ids: HashMap<&str, String> = HashMap::new();

        for (ai, area) in self.process_areas.iter().enumerate() {
            let area_path = format!("process_areas[{ai}]");
            require_text(&mut violations, &area_path, "id", &area.id);
            if let Some(first) = area_ids.get(area.id.as_str()) {
                violations.push(Violation {
                    path: format!("{area_path}.id"),
                    message: format!(
                        "duplicate process area id {:?} (first defined at {first})",
                        area.id
                    ),
                });
            } else {
                area_ids.insert(&area.id, format!("{area_path}.id"));
            }
            if area.goals.is_empty() {
                violations.push(Violation {
                    path: format!("{area_path}.goals"),
                    message: "process area has no goals".into(),
                });
            }

            let mut goal_ids: HashMap<&str, String> = HashMap::new();
            for (gi, goal) in area.goals.iter().enumerate() {
                let goal_path = format!("{area_path}.goals[{gi}]");
                require_text(&mut violations, &goal_path, "id", &goal.id);
                if let Some(first) = goal_ids.get(goal.id.as_str()) {
                    violations.push(Violation {
                        path: format!("{goal_path}.id"),
                        message: format!(
                            "duplicate goal id {:?} within {} (first defined at {first})",
                            goal.id, area.id
                        ),
                    });
                } else {
                    goal_ids.insert(&goal.id, format!("{goal_path}.id"));
                }
                if goal.stories.is_empty() {
                    violations.push(Violation {
                        path: format!("{goal_path}.stories"),
                        message: "goal has no assessable practice".into(),
                    });
                }

                for (si, story) in goal.stories.iter().enumerate() {
                    let story_path = format!("{goal_path}.stories[{si}]");
                    require_text(&mut violations, &story_path, "id", &story.id);
                    if let Some(first) = story_ids.get(story.id.as_str()) {
                        violations.push(Violation {
                            path: format!("{story_path}.id"),
                            message: format!(
                                "duplicate story id {:?} (first defined at {first})",
                                story.id
                            ),
                        });
                    } else {
                        story_ids.insert(&story.id, format!("{story_path}.id"));
                    }
                    require_text(&mut violations, &story_path, "model_ref", &story.model_ref);
                    require_text(&mut violations, &story_path, "role", &story.role);
                    require_text(
                        &mut violations,
                        &story_path,
                        "practice_instance",
                        &story.practice_instance,
                    );
                    require_text(&mut violations, &story_path, "benefit", &story.benefit);
                    if !(MIN_LEVEL..=MAX_LEVEL).contains(&story.level) {
                        violations.push(Violation {
                            path: format!("{story_path}.level"),
                            message: format!(
                                "maturity level {} outside {MIN_LEVEL}..={MAX_LEVEL}",
                                story.level
                            ),
                        });
                    }
                }
            }
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(CatalogError::Invalid(violations))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn area(&self, id: &str) -> Option<&ProcessArea> {
        self.process_areas.iter().find(|a| a.id == id)
    }

    /// Every story in catalog order, paired with its area.
    pub fn stories(&self) -> impl Iterator<Item = (&ProcessArea, &SpecificGoal, &StoryCard)> {
        self.process_areas.iter().flat_map(|area| {
            area.goals
                .iter()
                .flat_map(move |goal| goal.stories.iter().map(move |s| (area, goal, s)))
        })
    }

    pub fn story(&self, id: &str) -> Option<&StoryCard> {
        self.stories().map(|(_, _, s)| s).find(|s| s.id == id)
    }

    pub fn story_count(&self) -> usize {
        self.stories().count()
    }
}

impl ProcessArea {
    /// Stories of the area in presentation order (goal by goal).
    pub fn stories(&self) -> impl Iterator<Item = &StoryCard> {
        self.goals.iter().flat_map(|g| g.stories.iter())
    }

    /// The level at which the area first becomes part of the assessment scope.
    pub fn level(&self) -> Option<u8> {
        self.stories().map(|s| s.level).min()
    }
}

fn require_text(out: &mut Vec<Violation>, path: &str, field: &str, value: &str) {
    if value.trim().is_empty() {
        out.push(Violation {
            path: format!("{path}.{field}"),
            message: format!("{field} must not be empty"),
        });
    }
}

/// "As a {role} {pronoun} {practice_instance} so {benefit}", single-space joined.
pub fn render_story(story: &StoryCard) -> String {
    let article = story.article.as_deref().unwrap_or("a");
    let connector = story.connector.as_deref().unwrap_or("so");
    [
        "As",
        article,
        &story.role,
        &story.pronoun,
        &story.practice_instance,
        connector,
        &story.benefit,
    ]
    .iter()
    .map(|part| part.trim())
    .filter(|part| !part.is_empty())
    .collect::<Vec<_>>()
    .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScopeReport {
    pub levels: Vec<LevelCoverage>,
    pub total_stories: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelCoverage {
    pub level: u8,
    pub areas: Vec<AreaCoverage>,
    pub story_count: usize,
    /// Set when the catalog has no story at this level.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AreaCoverage {
    pub area_id: String,
    pub stories: usize,
}

/// Summarizes which areas and how many stories the catalog offers for each
/// requested maturity level.
pub fn scope_report(catalog: &Catalog, requested_levels: &BTreeSet<u8>) -> ScopeReport {
    let mut levels = Vec::with_capacity(requested_levels.len());
    for &level in requested_levels {
        let mut per_area: BTreeMap<usize, usize> = BTreeMap::new();
        for (ai, area) in catalog.process_areas.iter().enumerate() {
            let n = area.stories().filter(|s| s.level == level).count();
            if n > 0 {
                per_area.insert(ai, n);
            }
        }
        let areas: Vec<AreaCoverage> = per_area
            .into_iter()
            .map(|(ai, stories)| AreaCoverage {
                area_id: catalog.process_areas[ai].id.clone(),
                stories,
            })
            .collect();
        let story_count = areas.iter().map(|a| a.stories).sum();
        levels.push(LevelCoverage {
            level,
            empty: story_count == 0,
            areas,
            story_count,
        });
    }
    let total_stories = levels.iter().map(|l| l.story_count).sum();
    ScopeReport {
        levels,
        total_stories,
    }
}
