//! Private card votes with simultaneous reveal.
//!
//! Ballots are keyed by per-round random tokens. The ledger here only ever
//! sees `(token, card)` pairs; which participant holds which token lives in
//! the transient [`BallotBox`], which is dropped as soon as a round is
//! revealed and is never journaled.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Seat;

/// The five voting cards. There is deliberately no neutral card.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteCard {
    Always,
    MostOfTheTime,
    Seldom,
    Never,
    DontKnow,
}

/// Agreement labels used on the vote table, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    StronglyDisagree,
    Disagree,
    Agree,
    StronglyAgree,
    DontKnow,
}

impl VoteCard {
    pub const ALL: [VoteCard; 5] = [
        VoteCard::Always,
        VoteCard::MostOfTheTime,
        VoteCard::Seldom,
        VoteCard::Never,
        VoteCard::DontKnow,
    ];

    pub fn agreement(self) -> Agreement {
        match self {
            VoteCard::Always => Agreement::StronglyAgree,
            VoteCard::MostOfTheTime => Agreement::Agree,
            VoteCard::Seldom => Agreement::Disagree,
            VoteCard::Never => Agreement::StronglyDisagree,
            VoteCard::DontKnow => Agreement::DontKnow,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, VoteCard::Always | VoteCard::MostOfTheTime)
    }

    pub fn is_negative(self) -> bool {
        matches!(self, VoteCard::Seldom | VoteCard::Never)
    }

    pub fn label(self) -> &'static str {
        match self {
            VoteCard::Always => "Always",
            VoteCard::MostOfTheTime => "Most of the time",
            VoteCard::Seldom => "Seldom",
            VoteCard::Never => "Never",
            VoteCard::DontKnow => "Don't know",
        }
    }
}

impl Agreement {
    /// Fixed serialization and table column order.
    pub const COLUMNS: [Agreement; 5] = [
        Agreement::StronglyDisagree,
        Agreement::Disagree,
        Agreement::Agree,
        Agreement::StronglyAgree,
        Agreement::DontKnow,
    ];

    pub fn card(self) -> VoteCard {
        match self {
            Agreement::StronglyAgree => VoteCard::Always,
            Agreement::Agree => VoteCard::MostOfTheTime,
            Agreement::Disagree => VoteCard::Seldom,
            Agreement::StronglyDisagree => VoteCard::Never,
            Agreement::DontKnow => VoteCard::DontKnow,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Agreement::StronglyDisagree => "Strongly disagree",
            Agreement::Disagree => "Disagree",
            Agreement::Agree => "Agree",
            Agreement::StronglyAgree => "Strongly agree",
            Agreement::DontKnow => "Don't know",
        }
    }

    fn column(self) -> usize {
        self as usize
    }
}

/// Counts per card for one revealed round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct VoteDistribution {
    counts: [u32; 5],
}

impl VoteDistribution {
    pub fn from_cards<I: IntoIterator<Item = VoteCard>>(cards: I) -> Self {
        let mut d = VoteDistribution::default();
        for card in cards {
            d.counts[card.agreement().column()] += 1;
        }
        d
    }

    pub fn from_counts(counts: &[(VoteCard, u32)]) -> Self {
        let mut d = VoteDistribution::default();
        for &(card, n) in counts {
            d.counts[card.agreement().column()] += n;
        }
        d
    }

    pub fn count(&self, card: VoteCard) -> u32 {
        self.counts[card.agreement().column()]
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn positive(&self) -> u32 {
        self.count(VoteCard::Always) + self.count(VoteCard::MostOfTheTime)
    }

    pub fn negative(&self) -> u32 {
        self.count(VoteCard::Seldom) + self.count(VoteCard::Never)
    }

    /// `(card, count)` pairs in table column order.
    pub fn columns(&self) -> impl Iterator<Item = (Agreement, u32)> + '_ {
        Agreement::COLUMNS
            .iter()
            .map(move |&a| (a, self.counts[a.column()]))
    }
}

impl fmt::Display for VoteDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = VoteCard::ALL
            .iter()
            .filter(|&&c| self.count(c) > 0)
            .map(|&c| format!("{}: {}", c.label(), self.count(c)))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    strongly_disagree: u32,
    disagree: u32,
    agree: u32,
    strongly_agree: u32,
    dont_know: u32,
    total: u32,
}

impl From<VoteDistribution> for DistributionRepr {
    fn from(d: VoteDistribution) -> Self {
        let [strongly_disagree, disagree, agree, strongly_agree, dont_know] = d.counts;
        DistributionRepr {
            strongly_disagree,
            disagree,
            agree,
            strongly_agree,
            dont_know,
            total: d.total(),
        }
    }
}

impl TryFrom<DistributionRepr> for VoteDistribution {
    type Error = String;

    fn try_from(r: DistributionRepr) -> Result<Self, Self::Error> {
        let d = VoteDistribution {
            counts: [
                r.strongly_disagree,
                r.disagree,
                r.agree,
                r.strongly_agree,
                r.dont_know,
            ],
        };
        if d.total() != r.total {
            return Err(format!(
                "distribution total {} does not match the sum of counts {}",
                r.total,
                d.total()
            ));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoundId(pub u32);

impl fmt::Display for RoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "round {}", self.0)
    }
}

/// Per-round random ballot token. Never associated with a participant in
/// any persisted or transmitted record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BallotToken(pub String);

impl BallotToken {
    pub fn random(rng: &mut dyn RngCore) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        BallotToken(bytes.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundKind {
    Preliminary,
    Definitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundState {
    Open,
    Revealed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteRound {
    pub id: RoundId,
    pub story_id: String,
    pub kind: RoundKind,
    pub state: RoundState,
    tokens: BTreeSet<BallotToken>,
    ballots: BTreeMap<BallotToken, VoteCard>,
    revealed: Option<VoteDistribution>,
}

impl VoteRound {
    pub fn cast_count(&self) -> u32 {
        self.ballots.len() as u32
    }

    pub fn expected(&self) -> u32 {
        self.tokens.len() as u32
    }

    pub fn outstanding(&self) -> u32 {
        self.expected() - self.cast_count()
    }

    pub fn distribution(&self) -> Option<VoteDistribution> {
        self.revealed
    }

    pub fn tokens(&self) -> impl Iterator<Item = &BallotToken> {
        self.tokens.iter()
    }

    pub fn has_ballot(&self, token: &BallotToken) -> bool {
        self.ballots.contains_key(token)
    }

    pub(crate) fn ballot(&self, token: &BallotToken) -> Option<VoteCard> {
        self.ballots.get(token).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VotingError {
    #[error("a {kind:?} round is already open or revealed for story {story_id}")]
    DuplicateRound { story_id: String, kind: RoundKind },
    #[error("unknown {0}")]
    UnknownRound(RoundId),
    #[error("{0} has already been revealed; late votes are not accepted")]
    LateVote(RoundId),
    #[error("ballot token is not valid for {0}")]
    InvalidToken(RoundId),
    #[error("{} outstanding", outstanding_label(*.outstanding))]
    Outstanding { outstanding: u32 },
    #[error("round needs at least one distinct ballot token")]
    NoTokens,
    #[error("{round} was opened with round id out of sequence (expected {expected})")]
    OutOfSequence { round: RoundId, expected: RoundId },
}

fn outstanding_label(n: u32) -> String {
    if n == 1 {
        "1 vote".to_string()
    } else {
        format!("{n} votes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CastAck {
    pub round_id: RoundId,
    pub cast_count: u32,
    pub expected: u32,
}

/// All rounds of one session. Deterministic; rebuilt by journal replay.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundLedger {
    rounds: BTreeMap<RoundId, VoteRound>,
    by_story: BTreeMap<(String, RoundKind), RoundId>,
}

impl RoundLedger {
    pub fn next_id(&self) -> RoundId {
        RoundId(self.rounds.len() as u32 + 1)
    }

    pub fn get(&self, id: RoundId) -> Option<&VoteRound> {
        self.rounds.get(&id)
    }

    pub fn for_story(&self, story_id: &str, kind: RoundKind) -> Option<&VoteRound> {
        self.by_story
            .get(&(story_id.to_string(), kind))
            .and_then(|id| self.rounds.get(id))
    }

    pub fn rounds(&self) -> impl Iterator<Item = &VoteRound> {
        self.rounds.values()
    }

    pub fn check_open(
        &self,
        id: RoundId,
        story_id: &str,
        kind: RoundKind,
        tokens: &[BallotToken],
    ) -> Result<(), VotingError> {
        if self.by_story.contains_key(&(story_id.to_string(), kind)) {
            return Err(VotingError::DuplicateRound {
                story_id: story_id.to_string(),
                kind,
            });
        }
        if id != self.next_id() {
            return Err(VotingError::OutOfSequence {
                round: id,
                expected: self.next_id(),
            });
        }
        let distinct: BTreeSet<_> = tokens.iter().collect();
        if tokens.is_empty() || distinct.len() != tokens.len() || tokens.iter().any(|t| t.0.is_empty())
        {
            return Err(VotingError::NoTokens);
        }
        Ok(())
    }

    pub fn open(
        &mut self,
        id: RoundId,
        story_id: &str,
        kind: RoundKind,
        tokens: &[BallotToken],
    ) -> Result<&VoteRound, VotingError> {
        self.check_open(id, story_id, kind, tokens)?;
        self.by_story.insert((story_id.to_string(), kind), id);
        let round = self.rounds.entry(id).or_insert(VoteRound {
            id,
            story_id: story_id.to_string(),
            kind,
            state: RoundState::Open,
            tokens: tokens.iter().cloned().collect(),
            ballots: BTreeMap::new(),
            revealed: None,
        });
        Ok(round)
    }

    pub fn check_cast(&self, id: RoundId, token: &BallotToken) -> Result<(), VotingError> {
        let round = self.rounds.get(&id).ok_or(VotingError::UnknownRound(id))?;
        if round.state == RoundState::Revealed {
            return Err(VotingError::LateVote(id));
        }
        if !round.tokens.contains(token) {
            return Err(VotingError::InvalidToken(id));
        }
        Ok(())
    }

    /// Stores a ballot. Casting again with the same token replaces the
    /// earlier card until the round is revealed.
    pub fn cast(
        &mut self,
        id: RoundId,
        token: &BallotToken,
        card: VoteCard,
    ) -> Result<CastAck, VotingError> {
        self.check_cast(id, token)?;
        let round = self.rounds.get_mut(&id).expect("checked");
        round.ballots.insert(token.clone(), card);
        Ok(CastAck {
            round_id: id,
            cast_count: round.cast_count(),
            expected: round.expected(),
        })
    }

    /// Distribution the round would reveal now, or why it cannot.
    pub fn tally(&self, id: RoundId) -> Result<VoteDistribution, VotingError> {
        let round = self.rounds.get(&id).ok_or(VotingError::UnknownRound(id))?;
        if let Some(d) = round.revealed {
            return Ok(d);
        }
        if round.outstanding() > 0 {
            return Err(VotingError::Outstanding {
                outstanding: round.outstanding(),
            });
        }
        Ok(VoteDistribution::from_cards(round.ballots.values().copied()))
    }

    /// Reveals the round atomically. Revealing an already revealed round
    /// returns the same distribution.
    pub fn reveal(&mut self, id: RoundId) -> Result<VoteDistribution, VotingError> {
        let distribution = self.tally(id)?;
        let round = self.rounds.get_mut(&id).expect("tallied");
        round.state = RoundState::Revealed;
        round.revealed = Some(distribution);
        Ok(distribution)
    }
}

/// Who may see per-participant progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Viewer {
    Assessor,
    Practitioner,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundStatus {
    pub round_id: RoundId,
    pub story_id: String,
    pub kind: RoundKind,
    pub state: RoundState,
    pub cast_count: u32,
    pub expected: u32,
    /// Assessor only. `None` for a seat whose token binding was lost.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub has_cast: Option<Vec<SeatProgress>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<VoteDistribution>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeatProgress {
    pub seat: Seat,
    pub has_cast: Option<bool>,
}

/// Which seats have cast in an open round, without tokens or cards. This
/// is all that survives a restart of the ballot binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotProgress {
    pub round_id: RoundId,
    pub cast: BTreeSet<Seat>,
}

/// Transient token binding for the live process: which active seat holds
/// which ballot token of the open round. Never serialized.
#[derive(Debug, Default)]
pub struct BallotBox {
    round: Option<RoundId>,
    binding: HashMap<Seat, BallotToken>,
    /// Seats restored from [`BallotProgress`]: cast, token unknown.
    voted: BTreeSet<Seat>,
    restored: bool,
}

impl BallotBox {
    /// Hands the round's tokens out to the given seats in random order.
    pub fn issue(
        &mut self,
        round: RoundId,
        tokens: &[BallotToken],
        seats: &[Seat],
        rng: &mut dyn RngCore,
    ) {
        let mut shuffled = tokens.to_vec();
        shuffled.shuffle(rng);
        self.discard();
        self.round = Some(round);
        self.binding = seats.iter().copied().zip(shuffled).collect();
    }

    /// Rebuilds what is known after a restart: these seats have cast, the
    /// rest have not. Restored seats cannot draw a token again.
    pub fn restore(&mut self, progress: &BallotProgress) {
        self.discard();
        self.round = Some(progress.round_id);
        self.voted = progress.cast.clone();
        self.restored = true;
    }

    /// Seats that have cast in `round`, if known for every seat.
    pub fn progress(&self, round: &VoteRound) -> Option<BallotProgress> {
        if self.round != Some(round.id) {
            return None;
        }
        let mut cast = self.voted.clone();
        cast.extend(
            self.binding
                .iter()
                .filter(|(_, t)| round.has_ballot(t))
                .map(|(seat, _)| *seat),
        );
        (cast.len() as u32 == round.cast_count()).then_some(BallotProgress {
            round_id: round.id,
            cast,
        })
    }

    fn sync(&mut self, round: &VoteRound) {
        if self.round != Some(round.id) {
            self.discard();
            self.round = Some(round.id);
        }
    }

    /// Token for a seat. When the binding was lost (process restart), the
    /// seat is given a token that nobody holds and that has not been used.
    pub fn token_for(&mut self, round: &VoteRound, seat: Seat) -> Option<BallotToken> {
        self.sync(round);
        if self.voted.contains(&seat) {
            return None;
        }
        if let Some(t) = self.binding.get(&seat) {
            return Some(t.clone());
        }
        let held: BTreeSet<&BallotToken> = self.binding.values().collect();
        let free = round
            .tokens()
            .find(|t| !held.contains(t) && !round.has_ballot(t))?
            .clone();
        self.binding.insert(seat, free.clone());
        Some(free)
    }

    /// Binds a presented token to a seat that holds none, if no other seat
    /// holds it and it is still unused. Returns whether the seat may use it.
    pub fn claim(&mut self, round: &VoteRound, seat: Seat, token: &BallotToken) -> bool {
        self.sync(round);
        if self.voted.contains(&seat) {
            return false;
        }
        if let Some(held) = self.binding.get(&seat) {
            return held == token;
        }
        let taken = self.binding.values().any(|t| t == token);
        if taken || !round.tokens.contains(token) || round.has_ballot(token) {
            return false;
        }
        self.binding.insert(seat, token.clone());
        true
    }

    pub fn has_cast(&self, round: &VoteRound, seat: Seat) -> Option<bool> {
        if self.round != Some(round.id) {
            return None;
        }
        if self.voted.contains(&seat) {
            return Some(true);
        }
        match self.binding.get(&seat) {
            Some(t) => Some(round.has_ballot(t)),
            None => self.restored.then_some(false),
        }
    }

    /// Seats holding a card of the rarest category, when one category is
    /// strictly rarer than the most common one. Reads the binding, so it
    /// must run before [`BallotBox::discard`].
    pub fn minority_holders(&self, round: &VoteRound) -> Option<Vec<Seat>> {
        if self.round != Some(round.id) || !self.voted.is_empty() {
            return None;
        }
        let mut holders: BTreeMap<VoteCard, Vec<Seat>> = BTreeMap::new();
        for (seat, token) in &self.binding {
            if let Some(card) = round.ballot(token) {
                holders.entry(card).or_default().push(*seat);
            }
        }
        let max = holders.values().map(Vec::len).max()?;
        let min = holders.values().map(Vec::len).min()?;
        if min == max {
            return Some(Vec::new());
        }
        let mut seats: Vec<Seat> = holders
            .into_values()
            .filter(|v| v.len() == min)
            .flatten()
            .collect();
        seats.sort();
        Some(seats)
    }

    pub fn discard(&mut self) {
        self.round = None;
        self.binding.clear();
        self.voted.clear();
        self.restored = false;
    }
}
