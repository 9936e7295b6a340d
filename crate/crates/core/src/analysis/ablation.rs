//! Error-set manipulations used to probe which upweighted examples matter.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, GroupId};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::trainers::ErrorSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorSetEdit {
    /// Replace each member with a random member of the same group.
    SwapSameGroup,
    /// Remove every member of one group.
    DropGroup(GroupId),
    /// Remove members with `y == a`.
    DropAligned,
    /// Remove members with `y != a`.
    DropMisaligned,
    /// Draw `|E|` uniformly random training indices.
    ReplaceRandom,
    /// Replace the `y != a` members with as many random `y != a` examples.
    ReplaceMisaligned,
    /// Replace the `y == a` members with as many random `y == a` examples.
    ReplaceAligned,
}

impl ErrorSetEdit {
    fn needs_binary(&self) -> bool {
        matches!(
            self,
            ErrorSetEdit::DropAligned
                | ErrorSetEdit::DropMisaligned
                | ErrorSetEdit::ReplaceMisaligned
                | ErrorSetEdit::ReplaceAligned
        )
    }
}

impl fmt::Display for ErrorSetEdit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSetEdit::SwapSameGroup => write!(f, "swap-same-group"),
            ErrorSetEdit::DropGroup(g) => write!(f, "drop-group:{}:{}", g.attribute, g.label),
            ErrorSetEdit::DropAligned => write!(f, "drop-y-eq-a"),
            ErrorSetEdit::DropMisaligned => write!(f, "drop-y-neq-a"),
            ErrorSetEdit::ReplaceRandom => write!(f, "replace-random"),
            ErrorSetEdit::ReplaceMisaligned => write!(f, "replace-y-neq-a"),
            ErrorSetEdit::ReplaceAligned => write!(f, "replace-y-eq-a"),
        }
    }
}

impl FromStr for ErrorSetEdit {
    type Err = Error;

    /// Accepts the names printed by `Display`; `drop-group:<a>:<y>` names the
    /// group by attribute and label.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "swap-same-group" => ErrorSetEdit::SwapSameGroup,
            "drop-y-eq-a" => ErrorSetEdit::DropAligned,
            "drop-y-neq-a" => ErrorSetEdit::DropMisaligned,
            "replace-random" => ErrorSetEdit::ReplaceRandom,
            "replace-y-neq-a" => ErrorSetEdit::ReplaceMisaligned,
            "replace-y-eq-a" => ErrorSetEdit::ReplaceAligned,
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts.as_slice() {
                    ["drop-group", a, y] => {
                        let parse = |v: &str| {
                            v.parse::<usize>()
                                .map_err(|_| Error::config("mode", format!("bad group in `{other}`")))
                        };
                        ErrorSetEdit::DropGroup(GroupId::new(parse(a)?, parse(y)?))
                    }
                    _ => return Err(Error::config("mode", format!("unknown error-set edit `{other}`"))),
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditedErrorSet {
    pub error_set: ErrorSet,
    /// Set when a pool was smaller than the number of draws and sampling fell
    /// back to drawing with replacement.
    pub sampled_with_replacement: bool,
}

fn draw(pool: &[usize], k: usize, rng: &mut impl Rng, fallback: &mut bool) -> Vec<usize> {
    if k <= pool.len() {
        index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
    } else {
        *fallback = true;
        (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}

pub fn replace_error_set(
    error_set: &ErrorSet,
    train: &Dataset,
    edit: ErrorSetEdit,
    seed: u64,
) -> Result<EditedErrorSet> {
    train.require_groups("error-set replacement")?;
    let groups: Vec<GroupId> = train.examples().iter().map(|e| e.group.expect("annotated")).collect();
    if edit.needs_binary() && groups.iter().any(|g| g.attribute > 1 || g.label > 1) {
        return Err(Error::Unsupported(format!("`{edit}` needs binary attributes and labels")));
    }
    if let Some(&i) = error_set.indices().iter().find(|&&i| i >= train.len()) {
        return Err(Error::invalid(format!("error-set index {i} out of range")));
    }
    let mut rng = stream(seed, Stream::Ablation);
    let mut fallback = false;
    let members = error_set.indices();
    let pool_where = |pred: &dyn Fn(GroupId) -> bool| -> Vec<usize> {
        (0..groups.len()).filter(|&i| pred(groups[i])).collect()
    };

    let indices: Vec<usize> = match edit {
        ErrorSetEdit::SwapSameGroup => {
            let mut per_group: BTreeMap<GroupId, usize> = BTreeMap::new();
            for &i in members {
                *per_group.entry(groups[i]).or_default() += 1;
            }
            let mut out = Vec::with_capacity(members.len());
            for (g, k) in per_group {
                let pool = pool_where(&|h| h == g);
                out.extend(draw(&pool, k, &mut rng, &mut fallback));
            }
            out
        }
        ErrorSetEdit::DropGroup(g) => members.iter().copied().filter(|&i| groups[i] != g).collect(),
        ErrorSetEdit::DropAligned => members.iter().copied().filter(|&i| !groups[i].is_aligned()).collect(),
        ErrorSetEdit::DropMisaligned => members.iter().copied().filter(|&i| groups[i].is_aligned()).collect(),
        ErrorSetEdit::ReplaceRandom => {
            let pool: Vec<usize> = (0..train.len()).collect();
            draw(&pool, members.len(), &mut rng, &mut fallback)
        }
        ErrorSetEdit::ReplaceMisaligned | ErrorSetEdit::ReplaceAligned => {
            let replace_aligned = edit == ErrorSetEdit::ReplaceAligned;
            let (swap, keep): (Vec<usize>, Vec<usize>) = members
                .iter()
                .partition(|&&i| groups[i].is_aligned() == replace_aligned);
            let pool = pool_where(&|h| h.is_aligned() == replace_aligned);
            let mut out = keep;
            out.extend(draw(&pool, swap.len(), &mut rng, &mut fallback));
            out
        }
    };
    Ok(EditedErrorSet {
        error_set: ErrorSet::new(indices, error_set.source_epoch()),
        sampled_with_replacement: fallback,
    })
}
