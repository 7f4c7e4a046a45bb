//! Practice ratings from vote distributions, the per-practice capture sheet,
//! and aggregation to goals, process areas and an unofficial maturity level.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ProcessArea, SpecificGoal};
use crate::voting::{VoteCard, VoteDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PracticeRating {
    FullyImplemented,
    LargelyImplemented,
    PartiallyImplemented,
    NotImplemented,
    NeedsJudgment,
    NotRated,
}

impl PracticeRating {
    pub fn abbrev(self) -> &'static str {
        match self {
            PracticeRating::FullyImplemented => "FI",
            PracticeRating::LargelyImplemented => "LI",
            PracticeRating::PartiallyImplemented => "PI",
            PracticeRating::NotImplemented => "NI",
            PracticeRating::NeedsJudgment => "needs judgment",
            PracticeRating::NotRated => "not rated",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PracticeRating::FullyImplemented => "fully implemented",
            PracticeRating::LargelyImplemented => "largely implemented",
            PracticeRating::PartiallyImplemented => "partially implemented",
            PracticeRating::NotImplemented => "not implemented",
            PracticeRating::NeedsJudgment => "awaiting assessor judgment",
            PracticeRating::NotRated => "not rated",
        }
    }

    /// FI or LI.
    pub fn is_performed(self) -> bool {
        matches!(
            self,
            PracticeRating::FullyImplemented | PracticeRating::LargelyImplemented
        )
    }

    pub fn is_gap(self) -> bool {
        matches!(
            self,
            PracticeRating::PartiallyImplemented | PracticeRating::NotImplemented
        )
    }
}

impl fmt::Display for PracticeRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

/// The four ratings an assessor judgment may settle on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImplementationLevel {
    #[serde(rename = "FI")]
    Fully,
    #[serde(rename = "LI")]
    Largely,
    #[serde(rename = "PI")]
    Partially,
    #[serde(rename = "NI")]
    Not,
}

impl From<ImplementationLevel> for PracticeRating {
    fn from(level: ImplementationLevel) -> Self {
        match level {
            ImplementationLevel::Fully => PracticeRating::FullyImplemented,
            ImplementationLevel::Largely => PracticeRating::LargelyImplemented,
            ImplementationLevel::Partially => PracticeRating::PartiallyImplemented,
            ImplementationLevel::Not => PracticeRating::NotImplemented,
        }
    }
}

/// Which interpretation rule produced a rating. Rules are tried in order and
/// the first match wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    /// Every vote is Always or Most of the time.
    R1,
    /// Every vote is Seldom or Never.
    R2,
    /// Positive votes are a strict majority and every other vote is Don't know.
    R3,
    /// Seldom, Most of the time and Don't know together are a strict majority.
    R4,
    /// None of the above.
    R5,
}

impl Rule {
    pub fn rating(self) -> PracticeRating {
        match self {
            Rule::R1 => PracticeRating::FullyImplemented,
            Rule::R2 => PracticeRating::NotImplemented,
            Rule::R3 => PracticeRating::LargelyImplemented,
            Rule::R4 => PracticeRating::PartiallyImplemented,
            Rule::R5 => PracticeRating::NeedsJudgment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatingError {
    #[error("cannot rate an empty vote distribution")]
    EmptyDistribution,
    #[error("story {story_id} is rated {current}, only a needs-judgment rating can be resolved")]
    NotNeedsJudgment {
        story_id: String,
        current: PracticeRating,
    },
    #[error("an assessor judgment needs a rationale")]
    EmptyRationale,
    #[error("story {story_id} still awaits an assessor judgment")]
    UnresolvedJudgment { story_id: String },
}

fn strict_majority(part: u32, total: u32) -> bool {
    2 * part > total
}

/// Applies the rules in order and returns the first that matches.
pub fn classify_with_rule(d: &VoteDistribution) -> Result<Rule, RatingError> {
    let total = d.total();
    if total == 0 {
        return Err(RatingError::EmptyDistribution);
    }
    let positive = d.positive();
    let dont_know = d.count(VoteCard::DontKnow);
    let mixed = d.count(VoteCard::Seldom) + d.count(VoteCard::MostOfTheTime) + dont_know;

    let rule = if positive == total {
        Rule::R1
    } else if d.negative() == total {
        Rule::R2
    } else if strict_majority(positive, total) && positive + dont_know == total {
        Rule::R3
    } else if strict_majority(mixed, total) {
        Rule::R4
    } else {
        Rule::R5
    };
    Ok(rule)
}

pub fn classify_votes(d: &VoteDistribution) -> Result<PracticeRating, RatingError> {
    classify_with_rule(d).map(Rule::rating)
}

/// Short mechanical explanation of why a rule fired.
pub fn rule_rationale(rule: Rule, d: &VoteDistribution) -> String {
    let total = d.total();
    match rule {
        Rule::R1 => format!("all {total} votes were Always or Most of the time"),
        Rule::R2 => format!("all {total} votes were Seldom or Never"),
        Rule::R3 => format!(
            "{} of {total} votes were Always or Most of the time and the remaining {} were Don't know",
            d.positive(),
            d.count(VoteCard::DontKnow)
        ),
        Rule::R4 => format!(
            "{} of {total} votes were Seldom, Most of the time or Don't know",
            d.count(VoteCard::Seldom) + d.count(VoteCard::MostOfTheTime) + d.count(VoteCard::DontKnow)
        ),
        Rule::R5 => format!("votes {d} match no interpretation rule; assessor judgment required"),
    }
}

/// Settles a needs-judgment rating.
pub fn resolve_judgment(
    story_id: &str,
    current: PracticeRating,
    level: ImplementationLevel,
    rationale: &str,
) -> Result<PracticeRating, RatingError> {
    if current != PracticeRating::NeedsJudgment {
        return Err(RatingError::NotNeedsJudgment {
            story_id: story_id.to_string(),
            current,
        });
    }
    if rationale.trim().is_empty() {
        return Err(RatingError::EmptyRationale);
    }
    Ok(level.into())
}

/// Advisory thresholds for flagging inconsistent answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispersionThresholds {
    pub min_categories: u32,
    /// Don't-know share at or above which answers are flagged, as `[num, den]`.
    pub dont_know_share: Ratio<u32>,
}

impl Default for DispersionThresholds {
    fn default() -> Self {
        DispersionThresholds {
            min_categories: 3,
            dont_know_share: Ratio::new(1, 3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispersion {
    /// Distinct cards used, not counting Don't know.
    pub categories: u32,
    pub dont_know_share: Ratio<u32>,
    pub inconsistent: bool,
}

pub fn dispersion(
    d: &VoteDistribution,
    thresholds: &DispersionThresholds,
) -> Result<Dispersion, RatingError> {
    let total = d.total();
    if total == 0 {
        return Err(RatingError::EmptyDistribution);
    }
    let categories = VoteCard::ALL
        .iter()
        .filter(|&&c| c != VoteCard::DontKnow && d.count(c) > 0)
        .count() as u32;
    let dont_know_share = Ratio::new(d.count(VoteCard::DontKnow), total);
    Ok(Dispersion {
        categories,
        dont_know_share,
        inconsistent: categories >= thresholds.min_categories
            || dont_know_share >= thresholds.dont_know_share,
    })
}

/// A yes/no answer with an optional note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub answer: bool,
    #[serde(default)]
    pub note: String,
}

/// The assessor's capture sheet for one practice.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PracticeTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate_practice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficient: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub institutionalized: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documented: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strengths_weaknesses: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation_blockers: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traceable_problems: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub additional_comments: Option<String>,
}

/// Text entries may be the literal token "none" to mark them as considered.
pub const NONE_TOKEN: &str = "none";

pub fn is_none_token(text: &str) -> bool {
    text.trim().eq_ignore_ascii_case(NONE_TOKEN)
}

impl PracticeTable {
    /// Overlays every field set in `patch`.
    pub fn merge(&mut self, patch: &PracticeTable) {
        fn take<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if let Some(v) = src {
                *dst = Some(v.clone());
            }
        }
        take(&mut self.alternate_practice, &patch.alternate_practice);
        take(&mut self.relevant, &patch.relevant);
        take(&mut self.efficient, &patch.efficient);
        take(&mut self.institutionalized, &patch.institutionalized);
        take(&mut self.documented, &patch.documented);
        take(&mut self.strengths_weaknesses, &patch.strengths_weaknesses);
        take(&mut self.implementation_blockers, &patch.implementation_blockers);
        take(&mut self.traceable_problems, &patch.traceable_problems);
        take(&mut self.additional_comments, &patch.additional_comments);
    }

    pub fn is_empty(&self) -> bool {
        *self == PracticeTable::default()
    }

    /// Names of required entries that are still blank.
    pub fn missing_fields(&self) -> Vec<&'static str> {
        let text = |t: &Option<String>| t.as_deref().is_some_and(|s| !s.trim().is_empty());
        let mut missing = Vec::new();
        if self.relevant.is_none() {
            missing.push("relevant");
        }
        if self.efficient.is_none() {
            missing.push("efficient");
        }
        if self.institutionalized.is_none() {
            missing.push("institutionalized");
        }
        if self.documented.is_none() {
            missing.push("documented");
        }
        if !text(&self.strengths_weaknesses) {
            missing.push("strengths_weaknesses");
        }
        if !text(&self.implementation_blockers) {
            missing.push("implementation_blockers");
        }
        if !text(&self.traceable_problems) {
            missing.push("traceable_problems");
        }
        if !text(&self.additional_comments) {
            missing.push("additional_comments");
        }
        missing
    }

    pub fn is_complete(&self) -> bool {
        self.missing_fields().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Satisfaction {
    Satisfied,
    Unsatisfied,
    NotRated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub story_id: String,
    pub model_ref: String,
    pub rating: PracticeRating,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRating {
    pub goal_id: String,
    pub status: Satisfaction,
    pub contributions: Vec<Contribution>,
    /// One per partially or not implemented story.
    pub weaknesses: Vec<String>,
}

/// Rates a goal from the terminal ratings of its stories. A story missing
/// from `ratings` counts as not rated.
pub fn rate_goal(
    goal: &SpecificGoal,
    ratings: &BTreeMap<String, PracticeRating>,
) -> Result<GoalRating, RatingError> {
    let mut contributions = Vec::with_capacity(goal.stories.len());
    for story in &goal.stories {
        let rating = ratings
            .get(&story.id)
            .copied()
            .unwrap_or(PracticeRating::NotRated);
        if rating == PracticeRating::NeedsJudgment {
            return Err(RatingError::UnresolvedJudgment {
                story_id: story.id.clone(),
            });
        }
        contributions.push(Contribution {
            story_id: story.id.clone(),
            model_ref: story.model_ref.clone(),
            rating,
        });
    }
    let rated: Vec<&Contribution> = contributions
        .iter()
        .filter(|c| c.rating != PracticeRating::NotRated)
        .collect();
    let status = if rated.is_empty() {
        Satisfaction::NotRated
    } else if rated.iter().all(|c| c.rating.is_performed()) {
        Satisfaction::Satisfied
    } else {
        Satisfaction::Unsatisfied
    };
    let weaknesses = contributions
        .iter()
        .filter(|c| c.rating.is_gap())
        .map(|c| format!("{} is {}", c.model_ref, c.rating.label()))
        .collect();
    Ok(GoalRating {
        goal_id: goal.id.clone(),
        status,
        contributions,
        weaknesses,
    })
}

/// How the assessor disposed of an area that was cut short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipDisposition {
    NotRated,
    Unsatisfied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaRating {
    pub area_id: String,
    pub level: Option<u8>,
    pub status: Satisfaction,
    pub goals: Vec<GoalRating>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_disposition: Option<SkipDisposition>,
}

pub fn rate_area(
    area: &ProcessArea,
    goals: Vec<GoalRating>,
    skip: Option<SkipDisposition>,
) -> AreaRating {
    let status = match skip {
        Some(SkipDisposition::NotRated) => Satisfaction::NotRated,
        Some(SkipDisposition::Unsatisfied) => Satisfaction::Unsatisfied,
        None => {
            let rated: Vec<&GoalRating> = goals
                .iter()
                .filter(|g| g.status != Satisfaction::NotRated)
                .collect();
            if rated.is_empty() {
                Satisfaction::NotRated
            } else if rated.iter().all(|g| g.status == Satisfaction::Satisfied) {
                Satisfaction::Satisfied
            } else {
                Satisfaction::Unsatisfied
            }
        }
    };
    AreaRating {
        area_id: area.id.clone(),
        level: area.level(),
        status,
        goals,
        skip_disposition: skip,
    }
}

/// Process areas expected at each staged maturity level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<LevelAreas>", into = "Vec<LevelAreas>")]
pub struct MaturityReference(pub BTreeMap<u8, Vec<String>>);

/// Serialized form of one reference level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAreas {
    pub level: u8,
    pub areas: Vec<String>,
}

impl From<Vec<LevelAreas>> for MaturityReference {
    fn from(levels: Vec<LevelAreas>) -> Self {
        MaturityReference(levels.into_iter().map(|l| (l.level, l.areas)).collect())
    }
}

impl From<MaturityReference> for Vec<LevelAreas> {
    fn from(r: MaturityReference) -> Self {
        r.0.into_iter()
            .map(|(level, areas)| LevelAreas { level, areas })
            .collect()
    }
}

impl Default for MaturityReference {
    /// The staged grouping of the CMMI for Development v1.3 constellation.
    fn default() -> Self {
        let level = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        MaturityReference(BTreeMap::from([
            (2, level(&["REQM", "PP", "PMC", "SAM", "MA", "PPQA", "CM"])),
            (
                3,
                level(&[
                    "RD", "TS", "PI", "VER", "VAL", "OPF", "OPD", "OT", "IPM", "RSKM", "DAR",
                ]),
            ),
            (4, level(&["OPP", "QPM"])),
            (5, level(&["OPM", "CAR"])),
        ]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnofficialMaturity {
    /// Always true; the level is indicative only.
    pub unofficial: bool,
    pub level: Option<u8>,
    pub explanation: String,
}

/// Highest staged level whose areas (and every lower level's areas) are all
/// assessed and satisfied. Withheld when level 2 is not fully covered.
pub fn maturity_level(
    catalog: &Catalog,
    areas: &[AreaRating],
    reference: &MaturityReference,
) -> UnofficialMaturity {
    let status_of = |id: &str| areas.iter().find(|a| a.area_id == id).map(|a| a.status);
    let mut achieved = 1u8;
    let mut explanation = String::new();

    for (&level, required) in &reference.0 {
        if level < 2 {
            continue;
        }
        let mut expected: Vec<&str> = required.iter().map(String::as_str).collect();
        for area in &catalog.process_areas {
            if area.level() == Some(level) && !expected.contains(&area.id.as_str()) {
                expected.push(&area.id);
            }
        }
        let uncovered: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|id| !matches!(status_of(id), Some(s) if s != Satisfaction::NotRated))
            .collect();
        if !uncovered.is_empty() {
            explanation = format!(
                "level {level} not fully covered (missing or not rated: {})",
                uncovered.join(", ")
            );
            break;
        }
        let unsatisfied: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|id| status_of(id) == Some(Satisfaction::Unsatisfied))
            .collect();
        if !unsatisfied.is_empty() {
            explanation = format!(
                "level {level} areas not satisfied: {}",
                unsatisfied.join(", ")
            );
            break;
        }
        achieved = level;
    }

    if achieved == 1 && explanation.starts_with("level 2 not fully covered") {
        return UnofficialMaturity {
            unofficial: true,
            level: None,
            explanation: format!("withheld: {explanation}"),
        };
    }
    if explanation.is_empty() {
        explanation = format!("all assessed levels up to {achieved} satisfied");
    }
    UnofficialMaturity {
        unofficial: true,
        level: Some(achieved),
        explanation,
    }
}
