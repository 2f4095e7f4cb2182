//! Non-negative tables over sets of discrete variables.

use super::GraphError;

/// A weight per joint state of `scope`, row-major with the last variable
/// varying fastest. Variables are node indices of the owning network.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, table: Vec<f64>) -> Result<Factor, GraphError> {
        if scope.len() != cards.len() {
            return Err(GraphError::BadOrdering("scope and cardinality lengths differ".into()));
        }
        let expected: usize = cards.iter().product();
        if table.len() != expected {
            return Err(GraphError::CptShapeMismatch { node: format!("{scope:?}"), expected, got: table.len() });
        }
        if let Some(&bad) = table.iter().find(|w| w.is_nan() || **w < 0.0) {
            return Err(GraphError::ProbabilityOutOfRange { node: format!("{scope:?}"), row: 0, value: bad });
        }
        Ok(Factor { scope, cards, table })
    }

    pub fn scalar(value: f64) -> Factor {
        Factor { scope: Vec::new(), cards: Vec::new(), table: vec![value] }
    }

    /// All-ones factor; the identity for [`product`](Self::product).
    pub fn ones(scope: Vec<usize>, cards: Vec<usize>) -> Factor {
        let len = cards.iter().product();
        Factor { scope, cards, table: vec![1.0; len] }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Pointwise product over the union of scopes. The result scope is
    /// `self`'s scope followed by `other`'s variables not already present.
    pub fn product(&self, other: &Factor) -> Result<Factor, GraphError> {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.scope.iter().zip(&other.cards) {
            match self.scope.iter().position(|&s| s == v) {
                Some(i) if self.cards[i] != c => {
                    return Err(GraphError::CardinalityMismatch { var: v, left: self.cards[i], right: c })
                }
                Some(_) => {}
                None => {
                    scope.push(v);
                    cards.push(c);
                }
            }
        }

        // Stride of each result variable inside each operand (0 if absent).
        let self_strides = self.strides();
        let other_strides = other.strides();
        let lhs: Vec<usize> =
            scope.iter().map(|v| self.scope.iter().position(|s| s == v).map_or(0, |i| self_strides[i])).collect();
        let rhs: Vec<usize> =
            scope.iter().map(|v| other.scope.iter().position(|s| s == v).map_or(0, |i| other_strides[i])).collect();

        let len: usize = cards.iter().product();
        let mut table = Vec::with_capacity(len);
        let mut digits = vec![0usize; scope.len()];
        let (mut li, mut ri) = (0usize, 0usize);
        for _ in 0..len {
            table.push(self.table[li] * other.table[ri]);
            // odometer increment, last digit fastest
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                li += lhs[d];
                ri += rhs[d];
                if digits[d] < cards[d] {
                    break;
                }
                li -= lhs[d] * cards[d];
                ri -= rhs[d] * cards[d];
                digits[d] = 0;
            }
        }
        Ok(Factor { scope, cards, table })
    }

    /// Marginalizes `var` away.
    pub fn sum_out(&self, var: usize) -> Result<Factor, GraphError> {
        let pos = self.scope.iter().position(|&v| v == var).ok_or(GraphError::VarNotInScope(var))?;
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut table = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    table[o * inner + i] += self.table[base + i];
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Ok(Factor { scope, cards, table })
    }

    /// Slices the factor at `var = state`, dropping `var` from the scope.
    /// Factors not mentioning `var` are returned unchanged.
    pub fn restrict(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut table = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            table.extend_from_slice(&self.table[base..base + inner]);
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Factor { scope, cards, table }
    }
}
