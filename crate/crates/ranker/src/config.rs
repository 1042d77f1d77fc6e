use std::fmt;
use std::str::FromStr;

use routelab_autodiff::AdamConfig;
use serde::{Deserialize, Serialize};

/// Cross-hypothesis context module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Bidirectional LSTM over the hypothesis list.
    Sequence,
    /// Scaled dot-product attention over hypothesis embeddings.
    Attention,
    /// Mean of all hypothesis embeddings.
    Aggregation,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [
        EncoderKind::Sequence,
        EncoderKind::Attention,
        EncoderKind::Aggregation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Sequence => "sequence",
            EncoderKind::Attention => "attention",
            EncoderKind::Aggregation => "aggregation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy over every hypothesis.
    Bce,
    /// Multi-class cross-entropy over the list.
    Mce,
}

impl LossKind {
    pub const ALL: [LossKind; 2] = [LossKind::Bce, LossKind::Mce];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Mce => "mce",
        }
    }
}

macro_rules! display_from_str {
    ($ty:ty) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                Self::ALL
                    .into_iter()
                    .find(|k| k.as_str() == s)
                    .ok_or_else(|| format!("unknown {}: {s:?}", stringify!($ty)))
            }
        }
    };
}

display_from_str!(EncoderKind);
display_from_str!(LossKind);

/// One cell of the encoder x loss x augmentation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub encoder: EncoderKind,
    pub loss: LossKind,
    pub augmented: bool,
}

impl VariantSpec {
    /// All 12 cells in report order: encoder, then loss, then augmentation.
    pub fn grid() -> Vec<VariantSpec> {
        let mut out = Vec::with_capacity(12);
        for encoder in EncoderKind::ALL {
            for loss in LossKind::ALL {
                for augmented in [false, true] {
                    out.push(VariantSpec {
                        encoder,
                        loss,
                        augmented,
                    });
                }
            }
        }
        out
    }

    /// Stable short name, e.g. `sequence-bce-noaug`.
    pub fn key(&self) -> String {
        format!(
            "{}-{}-{}",
            self.encoder,
            self.loss,
            if self.augmented { "aug" } else { "noaug" }
        )
    }
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Nonlinearity between the two affine layers of the scoring head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadActivation {
    /// `x * sigmoid(x)`. Unbounded above, so list-wise scores cannot pile up
    /// at a shared ceiling.
    #[default]
    Silu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dims {
    pub d_tok: usize,
    pub d_int: usize,
    pub d_slot: usize,
    pub d_skill: usize,
    pub d_ctx: usize,
    /// Hypothesis embedding width.
    pub d_e: usize,
    /// LSTM hidden width per direction.
    pub d_h: usize,
    /// Scoring head hidden width.
    pub d_f: usize,
    pub heads: usize,
    /// Attention key width per head.
    pub d_k: usize,
    pub head_activation: HeadActivation,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            d_tok: 16,
            d_int: 16,
            d_slot: 16,
            d_skill: 16,
            d_ctx: 4,
            d_e: 32,
            d_h: 32,
            d_f: 64,
            heads: 2,
            d_k: 16,
            head_activation: HeadActivation::Silu,
        }
    }
}

impl Dims {
    pub fn embedding_input(&self) -> usize {
        self.d_tok + self.d_int + self.d_slot + self.d_skill + self.d_ctx
    }

    /// Width of the context vector produced by `encoder`.
    pub fn context_width(&self, encoder: EncoderKind) -> usize {
        match encoder {
            EncoderKind::Sequence => 2 * self.d_h,
            EncoderKind::Attention | EncoderKind::Aggregation => self.d_e,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub dims: Dims,
    /// Token table size; defaults to one past the largest token id seen in
    /// training data.
    pub token_vocab: Option<usize>,
    /// Randomly permute each instance's hypothesis list every epoch instead
    /// of keeping proposer order. Augmented lists carry their noise at the
    /// tail, which an order-sensitive encoder otherwise learns as a cue.
    pub shuffle_hypotheses: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 256,
            seed: 0,
            // Adam's own default lr of 1e-3 underfits at 15 epochs of batch 256.
            adam: AdamConfig {
                lr: 1e-2,
                ..AdamConfig::default()
            },
            dims: Dims::default(),
            token_vocab: None,
            shuffle_hypotheses: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_twelve_distinct_cells() {
        let grid = VariantSpec::grid();
        assert_eq!(grid.len(), 12);
        let keys: std::collections::HashSet<_> = grid.iter().map(VariantSpec::key).collect();
        assert_eq!(keys.len(), 12);
        assert_eq!(grid[0].key(), "sequence-bce-noaug");
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(
            "attention".parse::<EncoderKind>().unwrap(),
            EncoderKind::Attention
        );
        assert_eq!("mce".parse::<LossKind>().unwrap(), LossKind::Mce);
        assert!("lstm".parse::<EncoderKind>().is_err());
    }
}
