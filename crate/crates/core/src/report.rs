//! Findings document and table exports.
//!
//! Everything here is a pure function of a replayed session: no clock, no
//! randomness, ordered collections only. Documents carry seat-free,
//! name-free content; vote data appears only as per-story counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::render_story;
use crate::journal::{replay, ReplayError};
use crate::rating::{
    self, maturity_level, rate_area, rate_goal, Contribution, ImplementationLevel,
    PracticeRating, PracticeTable, Satisfaction, SkipDisposition, UnofficialMaturity,
};
use crate::session::events::{JournalEvent, ValidationStatus};
use crate::session::parking::{ParkingStatus, ParkingTag};
use crate::session::{Correction, Phase, Session};
use crate::voting::{Agreement, VoteDistribution};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("session is in phase {0}, not closed; request a draft for partial sessions")]
    NotClosed(Phase),
    #[error("assessor judgment pending for {}", .0.join(", "))]
    UnresolvedJudgments(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub catalog_title: String,
    pub catalog_version: String,
    pub session_id: String,
    /// Calendar date of the session, UTC.
    pub session_date: String,
    pub practitioner_count: u32,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub story_id: String,
    pub model_ref: String,
    pub rating: PracticeRating,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSection {
    pub goal_id: String,
    pub statement: String,
    pub status: Satisfaction,
    /// Story ratings the status is derived from.
    pub contributions: Vec<Contribution>,
    pub gaps: Vec<Gap>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipNote {
    pub reason: String,
    pub disposition: SkipDisposition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaSection {
    pub area_id: String,
    pub name: String,
    pub level: Option<u8>,
    pub status: Satisfaction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<SkipNote>,
    pub goals: Vec<GoalSection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strength {
    pub story_id: String,
    pub model_ref: String,
    pub statement: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeaknessSource {
    Rating,
    ImplementationBlockers,
    TraceableProblems,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weakness {
    pub story_id: String,
    pub model_ref: String,
    pub source: WeaknessSource,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentNote {
    pub story_id: String,
    pub model_ref: String,
    pub rating: ImplementationLevel,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryNote {
    pub story_id: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationNote {
    pub story_id: String,
    pub status: ValidationStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconsistentAnswers {
    pub story_id: String,
    pub categories: u32,
    /// Don't-know share in whole percent, rounded half up.
    pub dont_know_percent: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParkingDisposition {
    pub item_id: u32,
    pub text: String,
    pub tag: ParkingTag,
    pub status: ParkingStatus,
    pub consensus_reached: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingsDocument {
    pub draft: bool,
    pub header: Header,
    pub areas: Vec<AreaSection>,
    pub strengths: Vec<Strength>,
    pub weaknesses: Vec<Weakness>,
    pub judgments: Vec<JudgmentNote>,
    /// Stories still awaiting a judgment; only ever non-empty in drafts.
    pub pending_judgments: Vec<String>,
    pub validations: Vec<ValidationNote>,
    pub inconsistent_answers: Vec<InconsistentAnswers>,
    pub misinformation_notes: Vec<StoryNote>,
    pub maturity: UnofficialMaturity,
    pub parking_lot: Vec<ParkingDisposition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_inputs: Option<String>,
}

fn percent(part: u32, whole: u32) -> u32 {
    if whole == 0 {
        return 0;
    }
    (part * 200 + whole) / (whole * 2)
}

fn text_entry(t: &Option<String>) -> Option<&str> {
    t.as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty() && !rating::is_none_token(s))
}

/// Terminal ratings for aggregation. Pending judgments count as not rated,
/// which only happens for drafts.
fn final_ratings(session: &Session) -> BTreeMap<String, PracticeRating> {
    session
        .ratings()
        .into_iter()
        .map(|(id, r)| {
            let r = if r == PracticeRating::NeedsJudgment {
                PracticeRating::NotRated
            } else {
                r
            };
            (id, r)
        })
        .collect()
}

pub fn build_findings(session: &Session, draft: bool) -> Result<FindingsDocument, ReportError> {
    let pending = session.unresolved_judgments();
    if !draft {
        if session.phase() != Phase::Closed {
            return Err(ReportError::NotClosed(session.phase()));
        }
        if !pending.is_empty() {
            return Err(ReportError::UnresolvedJudgments(pending));
        }
    }
    let catalog = session.catalog();
    let ratings = final_ratings(session);

    let mut areas = Vec::new();
    let mut area_ratings = Vec::new();
    for area in &catalog.process_areas {
        let goals: Vec<_> = area
            .goals
            .iter()
            .map(|g| rate_goal(g, &ratings).expect("pending judgments mapped to not rated"))
            .collect();
        let skip = session.skips().get(&area.id);
        let rated = rate_area(area, goals, skip.map(|s| s.disposition));
        let sections = area
            .goals
            .iter()
            .zip(&rated.goals)
            .map(|(goal, g)| GoalSection {
                goal_id: goal.id.clone(),
                statement: goal.statement.clone(),
                status: g.status,
                contributions: g.contributions.clone(),
                gaps: g
                    .contributions
                    .iter()
                    .filter(|c| c.rating.is_gap())
                    .map(|c| Gap {
                        story_id: c.story_id.clone(),
                        model_ref: c.model_ref.clone(),
                        rating: c.rating,
                        statement: format!(
                            "{} ({}) is {}",
                            c.model_ref,
                            c.story_id,
                            c.rating.label()
                        ),
                    })
                    .collect(),
            })
            .collect();
        areas.push(AreaSection {
            area_id: area.id.clone(),
            name: area.name.clone(),
            level: rated.level,
            status: rated.status,
            skipped: skip.map(|s| SkipNote {
                reason: s.reason.clone(),
                disposition: s.disposition,
            }),
            goals: sections,
        });
        area_ratings.push(rated);
    }

    let mut strengths = Vec::new();
    let mut weaknesses = Vec::new();
    let mut judgments = Vec::new();
    let mut validations = Vec::new();
    let mut inconsistent = Vec::new();
    let mut misinformation = Vec::new();
    for (_, _, story) in catalog.stories() {
        let ws = session.workspace(&story.id).expect("catalog story");
        let rating = ratings.get(&story.id).copied();
        if rating == Some(PracticeRating::FullyImplemented) && ws.noteworthy {
            strengths.push(Strength {
                story_id: story.id.clone(),
                model_ref: story.model_ref.clone(),
                statement: render_story(story),
            });
        }
        if let Some(r) = rating.filter(|r| r.is_gap()) {
            weaknesses.push(Weakness {
                story_id: story.id.clone(),
                model_ref: story.model_ref.clone(),
                source: WeaknessSource::Rating,
                statement: format!("{} is {}", story.model_ref, r.label()),
            });
        }
        let table = &ws.practice_table;
        for (source, entry) in [
            (WeaknessSource::ImplementationBlockers, &table.implementation_blockers),
            (WeaknessSource::TraceableProblems, &table.traceable_problems),
        ] {
            if let Some(text) = text_entry(entry) {
                weaknesses.push(Weakness {
                    story_id: story.id.clone(),
                    model_ref: story.model_ref.clone(),
                    source,
                    statement: text.to_string(),
                });
            }
        }
        if let Some(j) = &ws.judgment {
            judgments.push(JudgmentNote {
                story_id: story.id.clone(),
                model_ref: story.model_ref.clone(),
                rating: j.rating,
                rationale: j.rationale.clone(),
            });
        }
        if let Some(finding) = &ws.finding {
            if let Some(status) = finding.validation {
                validations.push(ValidationNote {
                    story_id: story.id.clone(),
                    status,
                });
            }
            if let Some(note) = &finding.misinformation_note {
                misinformation.push(StoryNote {
                    story_id: story.id.clone(),
                    note: note.clone(),
                });
            }
        }
        if let Some(d) = ws.dispersion.filter(|d| d.inconsistent) {
            inconsistent.push(InconsistentAnswers {
                story_id: story.id.clone(),
                categories: d.categories,
                dont_know_percent: percent(*d.dont_know_share.numer(), *d.dont_know_share.denom()),
            });
        }
    }

    let maturity = maturity_level(catalog, &area_ratings, &session.config().maturity_reference);
    let parking_lot = session
        .parking()
        .items()
        .iter()
        .map(|i| ParkingDisposition {
            item_id: i.item_id,
            text: i.text.clone(),
            tag: i.tag,
            status: i.status,
            consensus_reached: i.consensus_reached,
            evidence_note: i.evidence_note.clone(),
        })
        .collect();

    Ok(FindingsDocument {
        draft,
        header: Header {
            catalog_title: catalog.title.clone(),
            catalog_version: catalog.version.clone(),
            session_id: session.id().to_string(),
            session_date: session.created_at().format("%Y-%m-%d").to_string(),
            practitioner_count: session.practitioner_count(),
            phase: session.phase(),
        },
        areas,
        strengths,
        weaknesses,
        judgments,
        pending_judgments: if draft { pending } else { Vec::new() },
        validations,
        inconsistent_answers: inconsistent,
        misinformation_notes: misinformation,
        maturity,
        parking_lot,
        external_inputs: session.external_inputs().map(str::to_string),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTableRow {
    pub area_id: String,
    pub story_id: String,
    pub model_ref: String,
    pub rating: PracticeRating,
    /// Absent for not-rated rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<VoteDistribution>,
    /// Per-column share in whole percent, same column order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percent: Option<[u32; 5]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTable {
    pub columns: Vec<Agreement>,
    pub rows: Vec<VoteTableRow>,
}

/// One row per catalog story, in catalog order.
pub fn vote_table(session: &Session) -> VoteTable {
    let ratings = session.ratings();
    let rows = session
        .catalog()
        .stories()
        .map(|(area, _, story)| {
            let ws = session.workspace(&story.id).expect("catalog story");
            let distribution = ws.definitive;
            VoteTableRow {
                area_id: area.id.clone(),
                story_id: story.id.clone(),
                model_ref: story.model_ref.clone(),
                rating: match distribution {
                    Some(_) => ratings[&story.id],
                    None => PracticeRating::NotRated,
                },
                percent: distribution.map(|d| {
                    Agreement::COLUMNS.map(|a| percent(d.count(a.card()), d.total()))
                }),
                distribution,
            }
        })
        .collect();
    VoteTable {
        columns: Agreement::COLUMNS.to_vec(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PracticeTableEntry {
    pub area_id: String,
    pub story_id: String,
    pub model_ref: String,
    pub rating: PracticeRating,
    /// Derived: the practice counts as performed when rated FI or LI.
    pub performed: bool,
    pub complete: bool,
    pub incomplete_override: bool,
    pub table: PracticeTable,
    pub corrections: Vec<Correction>,
}

/// One practice table per catalog story, in catalog order.
pub fn practice_tables(session: &Session) -> Vec<PracticeTableEntry> {
    let ratings = session.ratings();
    session
        .catalog()
        .stories()
        .map(|(area, _, story)| {
            let ws = session.workspace(&story.id).expect("catalog story");
            let rating = ratings
                .get(&story.id)
                .copied()
                .unwrap_or(PracticeRating::NotRated);
            PracticeTableEntry {
                area_id: area.id.clone(),
                story_id: story.id.clone(),
                model_ref: story.model_ref.clone(),
                rating,
                performed: rating.is_performed(),
                complete: ws.practice_table.is_complete(),
                incomplete_override: ws.incomplete_override,
                table: ws.practice_table.clone(),
                corrections: ws.corrections.clone(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub format_version: u32,
    pub draft: bool,
    pub session_id: String,
    pub journal_seq: u64,
    pub story_count: usize,
}

/// The machine-readable bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineExport {
    pub findings: FindingsDocument,
    pub vote_table: VoteTable,
    pub practice_tables: Vec<PracticeTableEntry>,
    pub meta: Meta,
}

pub fn machine_export(session: &Session, draft: bool) -> Result<MachineExport, ReportError> {
    Ok(MachineExport {
        findings: build_findings(session, draft)?,
        vote_table: vote_table(session),
        practice_tables: practice_tables(session),
        meta: meta(session, draft),
    })
}

fn meta(session: &Session, draft: bool) -> Meta {
    Meta {
        format_version: FORMAT_VERSION,
        draft,
        session_id: session.id().to_string(),
        journal_seq: session.last_seq(),
        story_count: session.catalog().story_count(),
    }
}

/// Every artifact a replay produces, keyed by file name.
pub fn render_all(session: &Session, draft: bool) -> Result<BTreeMap<&'static str, String>, ReportError> {
    let export = machine_export(session, draft)?;
    let vt = serde_json::json!({ "vote_table": export.vote_table, "meta": export.meta });
    let pt = serde_json::json!({ "practice_tables": export.practice_tables, "meta": export.meta });
    Ok(BTreeMap::from([
        ("findings.md", findings_markdown(&export.findings)),
        ("vote_table.md", vote_table_markdown(&export.vote_table, draft)),
        ("practice_tables.md", practice_tables_markdown(&export.practice_tables, draft)),
        ("findings.json", to_json(&export)),
        ("vote_table.json", to_json(&vt)),
        ("practice_tables.json", to_json(&pt)),
    ]))
}

/// Replays a journal and renders every artifact.
pub fn render_journal(
    events: &[JournalEvent],
    draft: bool,
) -> Result<BTreeMap<&'static str, String>, ReportError> {
    render_all(&replay(events)?, draft)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn status_label(s: Satisfaction) -> &'static str {
    match s {
        Satisfaction::Satisfied => "satisfied",
        Satisfaction::Unsatisfied => "not satisfied",
        Satisfaction::NotRated => "not rated",
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

const DRAFT_BANNER: &str = "> **DRAFT**: the session is still in progress; ratings may change.\n\n";

pub fn findings_markdown(doc: &FindingsDocument) -> String {
    let mut out = String::new();
    let h = &doc.header;
    let _ = writeln!(out, "# Findings: {} {}\n", h.catalog_title, h.catalog_version);
    if doc.draft {
        out.push_str(DRAFT_BANNER);
    }
    let _ = writeln!(out, "- Session: {}", h.session_id);
    let _ = writeln!(out, "- Date: {}", h.session_date);
    let _ = writeln!(out, "- Practitioners: {}\n", h.practitioner_count);

    out.push_str("## Process areas\n\n");
    for area in &doc.areas {
        let level = area.level.map(|l| format!(", level {l}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "### {} {}{}: {}\n",
            area.area_id,
            area.name,
            level,
            status_label(area.status)
        );
        if let Some(skip) = &area.skipped {
            let disposition = match skip.disposition {
                SkipDisposition::NotRated => "not rated",
                SkipDisposition::Unsatisfied => "not satisfied",
            };
            let _ = writeln!(out, "Skipped ({disposition}): {}\n", skip.reason);
        }
        for goal in &area.goals {
            let cites: Vec<String> = goal
                .contributions
                .iter()
                .map(|c| format!("{} {}", c.model_ref, c.rating.abbrev()))
                .collect();
            let _ = writeln!(
                out,
                "- {} {}: {} ({})",
                goal.goal_id,
                goal.statement,
                status_label(goal.status),
                cites.join("; ")
            );
            for gap in &goal.gaps {
                let _ = writeln!(out, "  - Gap: {}", gap.statement);
            }
        }
        out.push('\n');
    }

    out.push_str("## Strengths\n\n");
    if doc.strengths.is_empty() {
        out.push_str("None recorded.\n");
    }
    for s in &doc.strengths {
        let _ = writeln!(out, "- {}: {}", s.model_ref, s.statement);
    }
    out.push_str("\n## Weaknesses\n\n");
    if doc.weaknesses.is_empty() {
        out.push_str("None recorded.\n");
    }
    for w in &doc.weaknesses {
        let source = match w.source {
            WeaknessSource::Rating => "rating",
            WeaknessSource::ImplementationBlockers => "implementation blockers",
            WeaknessSource::TraceableProblems => "traceable problems",
        };
        let _ = writeln!(out, "- {} ({source}): {}", w.model_ref, w.statement);
    }

    if !doc.judgments.is_empty() || !doc.pending_judgments.is_empty() {
        out.push_str("\n## Assessor judgments\n\n");
        for j in &doc.judgments {
            let _ = writeln!(out, "- {}: {}. {}", j.model_ref, PracticeRating::from(j.rating).abbrev(), j.rationale);
        }
        for id in &doc.pending_judgments {
            let _ = writeln!(out, "- {id}: pending");
        }
    }
    if !doc.inconsistent_answers.is_empty() {
        out.push_str("\n## Inconsistent answers\n\n");
        for i in &doc.inconsistent_answers {
            let _ = writeln!(
                out,
                "- {}: {} answer categories, {}% don't know",
                i.story_id, i.categories, i.dont_know_percent
            );
        }
    }
    if !doc.misinformation_notes.is_empty() {
        out.push_str("\n## Vote changes\n\n");
        for n in &doc.misinformation_notes {
            let _ = writeln!(out, "- {}: {}", n.story_id, n.note);
        }
    }

    out.push_str("\n## Unofficial maturity level\n\n");
    match doc.maturity.level {
        Some(level) => {
            let _ = writeln!(out, "Level {level} (unofficial). {}", doc.maturity.explanation);
        }
        None => {
            let _ = writeln!(out, "Not reported: {}", doc.maturity.explanation);
        }
    }

    out.push_str("\n## Parking lot\n\n");
    if doc.parking_lot.is_empty() {
        out.push_str("No items.\n");
    }
    for p in &doc.parking_lot {
        let status = match p.status {
            ParkingStatus::Open => "open",
            ParkingStatus::Assigned => "assigned",
            ParkingStatus::Resolved => "resolved",
            ParkingStatus::AgreedToDisagree => "agreed to disagree",
            ParkingStatus::AssessorDecided => "decided by the assessor",
        };
        let consensus = if p.consensus_reached {
            "consensus reached"
        } else {
            "no consensus"
        };
        let _ = write!(out, "- #{} {}: {status}, {consensus}", p.item_id, p.text);
        if let Some(note) = &p.evidence_note {
            let _ = write!(out, ". Evidence: {note}");
        }
        out.push('\n');
    }
    if let Some(text) = &doc.external_inputs {
        let _ = writeln!(out, "\n## External inputs\n\n{}", text.trim_end());
    }
    out
}

pub fn vote_table_markdown(table: &VoteTable, draft: bool) -> String {
    let mut out = String::from("# Vote table\n\n");
    if draft {
        out.push_str(DRAFT_BANNER);
    }
    let headers: Vec<&str> = table.columns.iter().map(|c| c.label()).collect();
    let _ = writeln!(out, "| Area | Story | Practice | {} | Total | Rating |", headers.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(headers.len() + 5));
    for row in &table.rows {
        let cells: Vec<String> = match (row.distribution, row.percent) {
            (Some(d), Some(p)) => table
                .columns
                .iter()
                .zip(p)
                .map(|(c, pct)| format!("{} ({pct}%)", d.count(c.card())))
                .collect(),
            _ => vec!["".to_string(); headers.len()],
        };
        let total = row.distribution.map(|d| d.total().to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            row.area_id,
            row.story_id,
            row.model_ref,
            cells.join(" | "),
            total,
            row.rating.abbrev()
        );
    }
    out
}

fn answer_cell(a: &Option<rating::Answer>) -> String {
    match a {
        None => String::new(),
        Some(a) => {
            let yn = if a.answer { "yes" } else { "no" };
            if a.note.trim().is_empty() {
                yn.to_string()
            } else {
                format!("{yn}, {}", cell(a.note.trim()))
            }
        }
    }
}

pub fn practice_tables_markdown(entries: &[PracticeTableEntry], draft: bool) -> String {
    let mut out = String::from("# Practice tables\n\n");
    if draft {
        out.push_str(DRAFT_BANNER);
    }
    for e in entries {
        let _ = writeln!(
            out,
            "## {} {} ({})\n",
            e.story_id,
            e.model_ref,
            e.rating.abbrev()
        );
        let t = &e.table;
        let text = |v: &Option<String>| v.as_deref().map(cell).unwrap_or_default();
        out.push_str("| Entry | Value |\n|---|---|\n");
        let rows = [
            ("Performed", if e.performed { "yes".into() } else { "no".into() }),
            ("Alternate practice", text(&t.alternate_practice)),
            ("Relevant", answer_cell(&t.relevant)),
            ("Efficient", answer_cell(&t.efficient)),
            ("Institutionalized", answer_cell(&t.institutionalized)),
            ("Documented", answer_cell(&t.documented)),
            ("Strengths and weaknesses", text(&t.strengths_weaknesses)),
            ("Implementation blockers", text(&t.implementation_blockers)),
            ("Traceable problems", text(&t.traceable_problems)),
            ("Additional comments", text(&t.additional_comments)),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "| {k} | {v} |");
        }
        if e.incomplete_override {
            out.push_str("\nDefinitive vote opened with this table incomplete.\n");
        }
        for c in &e.corrections {
            let _ = writeln!(out, "\nCorrection: {}", c.note);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent(9, 10), 90);
        assert_eq!(percent(1, 3), 33);
        assert_eq!(percent(2, 3), 67);
        assert_eq!(percent(1, 8), 13);
        assert_eq!(percent(0, 0), 0);
    }
}
