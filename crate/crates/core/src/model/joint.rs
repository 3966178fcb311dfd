use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major bijection between per-agent indices and a dense joint index.
///
/// Agent 0 is the most significant digit, so with sizes `(6, 6)` the tuple
/// `(a0, a1)` maps to `a0 * 6 + a1`. Used for joint actions and joint
/// mental-state profiles alike.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "JointIndexRepr", into = "JointIndexRepr")]
pub struct JointIndex {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

#[derive(Serialize, Deserialize)]
struct JointIndexRepr {
    sizes: Vec<usize>,
}

impl From<JointIndexRepr> for JointIndex {
    fn from(r: JointIndexRepr) -> Self {
        JointIndex::new(r.sizes)
    }
}

impl From<JointIndex> for JointIndexRepr {
    fn from(j: JointIndex) -> Self {
        JointIndexRepr { sizes: j.sizes }
    }
}

impl JointIndex {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut strides = alloc::vec![1usize; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let total = sizes.iter().product();
        JointIndex { sizes, strides, total }
    }

    /// `n` agents sharing the same per-agent size.
    pub fn uniform(n: usize, size: usize) -> Self {
        Self::new(alloc::vec![size; n])
    }

    /// Number of joint values.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Number of factors (agents).
    pub fn arity(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, agent: usize) -> usize {
        self.sizes[agent]
    }

    pub fn encode(&self, parts: &[usize]) -> Result<usize> {
        if parts.len() != self.sizes.len() {
            return Err(Error::IndexOutOfRange {
                what: "joint tuple arity",
                index: parts.len(),
                size: self.sizes.len(),
            });
        }
        let mut id = 0;
        for ((&p, &size), &stride) in parts.iter().zip(&self.sizes).zip(&self.strides) {
            if p >= size {
                return Err(Error::IndexOutOfRange {
                    what: "agent component",
                    index: p,
                    size,
                });
            }
            id += p * stride;
        }
        Ok(id)
    }

    /// Encode without range checks. Callers guarantee `parts[i] < sizes[i]`.
    #[inline]
    pub fn encode_unchecked(&self, parts: &[usize]) -> usize {
        parts.iter().zip(&self.strides).map(|(p, s)| p * s).sum()
    }

    pub fn decode(&self, id: usize) -> Result<Vec<usize>> {
        let mut out = alloc::vec![0; self.sizes.len()];
        self.decode_into(id, &mut out)?;
        Ok(out)
    }

    pub fn decode_into(&self, id: usize, out: &mut [usize]) -> Result<()> {
        if id >= self.total {
            return Err(Error::IndexOutOfRange {
                what: "joint index",
                index: id,
                size: self.total,
            });
        }
        for (i, o) in out.iter_mut().enumerate().take(self.sizes.len()) {
            *o = (id / self.strides[i]) % self.sizes[i];
        }
        Ok(())
    }

    /// Component of one agent in a joint id.
    #[inline]
    pub fn component(&self, id: usize, agent: usize) -> usize {
        (id / self.strides[agent]) % self.sizes[agent]
    }
}
