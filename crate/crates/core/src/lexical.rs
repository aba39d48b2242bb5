//! Similarity of identifier names from their characters: longest common
//! subsequence, longest common substring, and the all-substrings kernel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LexicalError {
    #[error("normalized substring kernel is undefined for an empty identifier")]
    EmptyIdentifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexicalKernel {
    Lcs,
    Lcu,
    Const,
}

impl LexicalKernel {
    pub fn name(self) -> &'static str {
        match self {
            LexicalKernel::Lcs => "lcs",
            LexicalKernel::Lcu => "lcu",
            LexicalKernel::Const => "const",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexicalConfig {
    pub kernel: LexicalKernel,
    pub const_normalization: bool,
    /// Compare characters exactly instead of case-folded.
    pub case_sensitive: bool,
}

impl Default for LexicalConfig {
    fn default() -> Self {
        LexicalConfig { kernel: LexicalKernel::Lcu, const_normalization: true, case_sensitive: false }
    }
}

impl LexicalConfig {
    pub fn with_kernel(kernel: LexicalKernel) -> Self {
        LexicalConfig { kernel, ..Self::default() }
    }

    /// Score of the configured kernel; empty identifiers score 0.
    pub fn sim(&self, a: &str, b: &str) -> f64 {
        let (a, b) = (self.chars(a), self.chars(b));
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        match self.kernel {
            LexicalKernel::Lcs => squared_ratio(lcs_len(&a, &b), a.len(), b.len()),
            LexicalKernel::Lcu => squared_ratio(lcu_len(&a, &b), a.len(), b.len()),
            LexicalKernel::Const if self.const_normalization => const_normalized(&a, &b),
            LexicalKernel::Const => const_raw(&a, &b) as f64,
        }
    }

    fn chars(&self, s: &str) -> Vec<char> {
        if self.case_sensitive {
            s.chars().collect()
        } else {
            s.chars().flat_map(char::to_lowercase).collect()
        }
    }
}

fn squared_ratio(common: usize, la: usize, lb: usize) -> f64 {
    (common * common) as f64 / (la * lb) as f64
}

fn fold(s: &str) -> Vec<char> {
    s.chars().flat_map(char::to_lowercase).collect()
}

/// Longest common subsequence, case-folded.
pub fn lcs(a: &str, b: &str) -> String {
    let (a, b) = (fold(a), fold(b));
    let table = lcs_table(&a, &b);
    let (mut i, mut j) = (a.len(), b.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if a[i - 1] == b[j - 1] {
            out.push(a[i - 1]);
            i -= 1;
            j -= 1;
        } else if table[i - 1][j] >= table[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.iter().rev().collect()
}

/// Longest common substring, case-folded; the leftmost in `a` on ties.
pub fn lcu(a: &str, b: &str) -> String {
    let (a, b) = (fold(a), fold(b));
    let (len, end) = lcu_span(&a, &b);
    a[end - len..end].iter().collect()
}

pub fn sim_lcs(a: &str, b: &str) -> f64 {
    LexicalConfig::with_kernel(LexicalKernel::Lcs).sim(a, b)
}

pub fn sim_lcu(a: &str, b: &str) -> f64 {
    LexicalConfig::with_kernel(LexicalKernel::Lcu).sim(a, b)
}

/// Unnormalized substring kernel: shared substring occurrence products.
pub fn sim_const_raw(a: &str, b: &str) -> u64 {
    const_raw(&fold(a), &fold(b))
}

pub fn sim_const(a: &str, b: &str) -> Result<f64, LexicalError> {
    let (a, b) = (fold(a), fold(b));
    if a.is_empty() || b.is_empty() {
        return Err(LexicalError::EmptyIdentifier);
    }
    Ok(const_normalized(&a, &b))
}

fn lcs_table<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// `(length, end index in a)` of the leftmost longest common substring.
fn lcu_span<T: PartialEq>(a: &[T], b: &[T]) -> (usize, usize) {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let (mut best, mut end) = (0, 0);
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            if cur[j] > best {
                best = cur[j];
                end = i;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best, end)
}

pub fn lcu_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcu_span(a, b).0
}

fn const_normalized(a: &[char], b: &[char]) -> f64 {
    let ab = const_raw(a, b) as f64;
    let aa = const_raw(a, a) as f64;
    let bb = const_raw(b, b) as f64;
    ab / (aa * bb).sqrt()
}

/// `sum over distinct non-empty s of num_s(a) num_s(b)`, which equals the sum
/// of common-prefix lengths over all suffix pairs `(a[i..], b[j..])`. With
/// `F(x)` the pairwise LCP sum over suffixes of a single string, the cross
/// term is `F(a # b) - F(a) - F(b)`.
pub fn const_raw(a: &[char], b: &[char]) -> u64 {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let to_codes = |s: &[char]| s.iter().map(|&c| c as u32).collect::<Vec<u32>>();
    let (ca, cb) = (to_codes(a), to_codes(b));
    let mut joined = ca.clone();
    joined.push(u32::MAX);
    joined.extend_from_slice(&cb);
    suffix::pairwise_lcp_sum(&joined) - suffix::pairwise_lcp_sum(&ca) - suffix::pairwise_lcp_sum(&cb)
}

pub mod suffix {
    //! Suffix array by prefix doubling and the Kasai LCP array.

    pub fn suffix_array(s: &[u32]) -> Vec<usize> {
        let n = s.len();
        let mut sa: Vec<usize> = (0..n).collect();
        let mut rank: Vec<i64> = s.iter().map(|&c| c as i64).collect();
        let mut tmp = vec![0i64; n];
        if n < 2 {
            return sa;
        }
        let mut k = 1;
        loop {
            let key = |i: usize, rank: &[i64]| (rank[i], if i + k < n { rank[i + k] } else { -1 });
            sa.sort_by_key(|&i| key(i, &rank));
            tmp[sa[0]] = 0;
            for w in 1..n {
                tmp[sa[w]] = tmp[sa[w - 1]] + i64::from(key(sa[w - 1], &rank) < key(sa[w], &rank));
            }
            std::mem::swap(&mut rank, &mut tmp);
            if rank[sa[n - 1]] as usize == n - 1 {
                break;
            }
            k *= 2;
        }
        sa
    }

    /// `lcp[r]` is the common-prefix length of suffixes `sa[r-1]` and `sa[r]`;
    /// `lcp[0] = 0`.
    pub fn lcp_array(s: &[u32], sa: &[usize]) -> Vec<usize> {
        let n = s.len();
        let mut rank = vec![0; n];
        for (r, &i) in sa.iter().enumerate() {
            rank[i] = r;
        }
        let mut lcp = vec![0; n];
        let mut h = 0usize;
        for i in 0..n {
            if rank[i] > 0 {
                let j = sa[rank[i] - 1];
                while i + h < n && j + h < n && s[i + h] == s[j + h] {
                    h += 1;
                }
                lcp[rank[i]] = h;
                h = h.saturating_sub(1);
            } else {
                h = 0;
            }
        }
        lcp
    }

    /// Sum of common-prefix lengths over all unordered suffix pairs: the sum
    /// of minima over every subarray of `lcp[1..]`, by a monotone stack.
    pub fn pairwise_lcp_sum(s: &[u32]) -> u64 {
        if s.len() < 2 {
            return 0;
        }
        let sa = suffix_array(s);
        let lcp = lcp_array(s, &sa);
        let mut total = 0u64;
        // stack of (value, count of subarrays ending here whose min is value)
        let mut stack: Vec<(u64, u64)> = Vec::new();
        let mut running = 0u64;
        for &v in &lcp[1..] {
            let v = v as u64;
            let mut count = 1u64;
            while let Some(&(top, c)) = stack.last() {
                if top < v {
                    break;
                }
                running -= top * c;
                count += c;
                stack.pop();
            }
            stack.push((v, count));
            running += v * count;
            total += running;
        }
        total
    }
}
