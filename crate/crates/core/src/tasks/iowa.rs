//! Four-deck card task with fixed 10-card payoff blocks.
//!
//! Decks A and B pay more per card but lose 250 per block; C and D pay less
//! and gain 250 per block. In shuffle mode each new block permutes its loss
//! positions with the environment stream.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

pub const BLOCK_LEN: usize = 10;
pub const DISADVANTAGEOUS_BLOCK_NET: i64 = -250;
pub const ADVANTAGEOUS_BLOCK_NET: i64 = 250;
pub const DEFAULT_INITIAL_BANKROLL: i64 = 2000;
pub const DEFAULT_EPISODE_PICKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Deck {
    A,
    B,
    C,
    D,
}

impl Deck {
    pub const ALL: [Deck; 4] = [Deck::A, Deck::B, Deck::C, Deck::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Deck> {
        Self::ALL.get(i).copied()
    }

    pub fn is_advantageous(self) -> bool {
        matches!(self, Deck::C | Deck::D)
    }

    pub fn parse(label: &str) -> Option<Deck> {
        match label.trim().to_ascii_uppercase().as_str() {
            "A" => Some(Deck::A),
            "B" => Some(Deck::B),
            "C" => Some(Deck::C),
            "D" => Some(Deck::D),
            _ => None,
        }
    }
}

impl fmt::Display for Deck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeckSpec {
    pub deck: Deck,
    pub reward_per_card: i64,
    /// 1-based positions within a block.
    pub loss_positions: Vec<usize>,
    pub loss_amounts: Vec<i64>,
}

impl DeckSpec {
    pub fn block_net(&self) -> i64 {
        self.reward_per_card * BLOCK_LEN as i64 - self.loss_amounts.iter().sum::<i64>()
    }

    /// Loss per card position for one block, in declared order.
    pub fn block_losses(&self) -> [i64; BLOCK_LEN] {
        let mut losses = [0; BLOCK_LEN];
        for (&pos, &amount) in self.loss_positions.iter().zip(&self.loss_amounts) {
            losses[pos - 1] = amount;
        }
        losses
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeckSchedule {
    pub decks: Vec<DeckSpec>,
}

impl Default for DeckSchedule {
    fn default() -> Self {
        let spec = |deck, reward_per_card, loss_positions: &[usize], loss_amounts: &[i64]| DeckSpec {
            deck,
            reward_per_card,
            loss_positions: loss_positions.to_vec(),
            loss_amounts: loss_amounts.to_vec(),
        };
        Self {
            decks: vec![
                spec(Deck::A, 100, &[3, 5, 7, 9, 10], &[150, 200, 250, 300, 350]),
                spec(Deck::B, 100, &[9], &[1250]),
                spec(Deck::C, 50, &[3, 5, 7, 9, 10], &[50, 50, 50, 50, 50]),
                spec(Deck::D, 50, &[10], &[250]),
            ],
        }
    }
}

impl DeckSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.decks.len() != 4 {
            return Err(Error::validation("decks", "schedule must list decks A, B, C, D"));
        }
        for (i, spec) in self.decks.iter().enumerate() {
            let path = format!("decks[{i}]");
            if spec.deck.index() != i {
                return Err(Error::validation(format!("{path}.deck"), "decks must appear in order A, B, C, D"));
            }
            if spec.loss_positions.len() != spec.loss_amounts.len() {
                return Err(Error::validation(
                    format!("{path}.loss_amounts"),
                    "must have one amount per loss position",
                ));
            }
            let mut seen = [false; BLOCK_LEN];
            for (j, &pos) in spec.loss_positions.iter().enumerate() {
                if !(1..=BLOCK_LEN).contains(&pos) || std::mem::replace(&mut seen[pos - 1], true) {
                    return Err(Error::validation(
                        format!("{path}.loss_positions[{j}]"),
                        format!("position {pos} is out of range or repeated"),
                    ));
                }
            }
            if spec.reward_per_card < 0 || spec.loss_amounts.iter().any(|&l| l < 0) {
                return Err(Error::validation(path.clone(), "rewards and losses must be non-negative"));
            }
            let expected = if spec.deck.is_advantageous() {
                ADVANTAGEOUS_BLOCK_NET
            } else {
                DISADVANTAGEOUS_BLOCK_NET
            };
            if spec.block_net() != expected {
                return Err(Error::validation(
                    path,
                    format!("block net is {} but deck {} must net {expected}", spec.block_net(), spec.deck),
                ));
            }
        }
        Ok(())
    }

    pub fn spec(&self, deck: Deck) -> &DeckSpec {
        &self.decks[deck.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draw {
    pub deck: Deck,
    pub reward: i64,
    pub loss: i64,
}

impl Draw {
    pub fn net(&self) -> i64 {
        self.reward - self.loss
    }
}

/// What an agent may see of its own past draws from one deck.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeckStats {
    pub picks: usize,
    pub total_reward: i64,
    pub total_loss: i64,
    pub loss_count: usize,
    pub max_loss: i64,
}

impl DeckStats {
    pub fn mean_net(&self) -> Option<f64> {
        (self.picks > 0).then(|| (self.total_reward - self.total_loss) as f64 / self.picks as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IowaObservation {
    pub step: usize,
    pub bankroll: i64,
    pub decks: [DeckStats; 4],
    pub last: Option<Draw>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IowaState {
    schedule: DeckSchedule,
    shuffle: bool,
    rng: RngState,
    card_index: [usize; 4],
    current_block: [[i64; BLOCK_LEN]; 4],
    pub initial_bankroll: i64,
    pub bankroll: i64,
    pub history: Vec<Draw>,
}

impl IowaState {
    pub fn new(schedule: DeckSchedule, initial_bankroll: i64, shuffle: bool, rng: RngState) -> Result<Self> {
        schedule.validate()?;
        let mut current_block = [[0; BLOCK_LEN]; 4];
        for deck in Deck::ALL {
            current_block[deck.index()] = schedule.spec(deck).block_losses();
        }
        let mut state = Self {
            schedule,
            shuffle,
            rng,
            card_index: [0; 4],
            current_block,
            initial_bankroll,
            bankroll: initial_bankroll,
            history: Vec::new(),
        };
        if shuffle {
            for deck in Deck::ALL {
                state.deal_block(deck);
            }
        }
        Ok(state)
    }

    fn deal_block(&mut self, deck: Deck) {
        let mut losses = self.schedule.spec(deck).block_losses();
        if self.shuffle {
            self.rng.shuffle(&mut losses);
        }
        self.current_block[deck.index()] = losses;
    }

    pub fn card_index(&self, deck: Deck) -> usize {
        self.card_index[deck.index()]
    }

    /// Loss layout of the block currently being dealt from `deck`.
    pub fn current_block(&self, deck: Deck) -> [i64; BLOCK_LEN] {
        self.current_block[deck.index()]
    }

    pub fn step(&mut self, deck: Deck) -> Draw {
        let d = deck.index();
        let pos = self.card_index[d] % BLOCK_LEN;
        if pos == 0 && self.card_index[d] > 0 {
            self.deal_block(deck);
        }
        let draw = Draw {
            deck,
            reward: self.schedule.spec(deck).reward_per_card,
            loss: self.current_block[d][pos],
        };
        self.card_index[d] += 1;
        self.bankroll += draw.net();
        self.history.push(draw);
        draw
    }

    pub fn observation(&self) -> IowaObservation {
        IowaObservation {
            step: self.history.len(),
            bankroll: self.bankroll,
            decks: deck_stats(&self.history),
            last: self.history.last().copied(),
        }
    }
}

pub fn deck_stats(history: &[Draw]) -> [DeckStats; 4] {
    let mut stats = [DeckStats::default(); 4];
    for d in history {
        let s = &mut stats[d.deck.index()];
        s.picks += 1;
        s.total_reward += d.reward;
        s.total_loss += d.loss;
        if d.loss > 0 {
            s.loss_count += 1;
            s.max_loss = s.max_loss.max(d.loss);
        }
    }
    stats
}

pub fn iowa_optimal_rate(history: &[Draw]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Estimation("deck history is empty".into()));
    }
    let good = history.iter().filter(|d| d.deck.is_advantageous()).count();
    Ok(good as f64 / history.len() as f64)
}
