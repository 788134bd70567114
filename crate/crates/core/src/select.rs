//! Wavelength-set selection by depth-first search.
//!
//! The objective trades the squared identifiable range against the
//! regression gain:
//!
//! ```text
//! L(lambda_1..lambda_N) = P^2 sum(lambda_n^-2) + gamma / sum(lambda_n^-2)
//! ```
//!
//! Fixing `lambda_1 = lambda_max` and writing `lambda_n = (p_n/q_n)
//! lambda_max` with `gcd(p_n, q_n) = 1` turns the constrained minimization
//! into an integer program over `(p, q)`:
//!
//! ```text
//! L2(p, q) = Q(p)^2 D(p, q) + gamma lambda_max^2 / D(p, q)
//! Q(p) = lcm(p_2..p_N),  D(p, q) = 1 + sum (q_n/p_n)^2
//! ```
//!
//! subject to `lcm(p) >= r_max / lambda_max` and
//! `p_n <= q_n <= (lambda_max/lambda_min) p_n`. The depth-first search
//! alternates a `p`-level and a `q`-level per wavelength, pruning `p` by the
//! live upper bound `p_n^2 <= (Ltilde - gamma B) / N` (or `p_n <= kappa`
//! when a resolution cap is set) and restricting to ascending `p` since the
//! objective is permutation-invariant.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use num_integer::Integer as _;
use num_traits::{One, Signed, ToPrimitive};
use thiserror::Error;

use crate::exact::{to_real, Integer, Rational};
use crate::lattice::WavelengthSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible solution within the search bounds")]
    Infeasible,
    #[error("search bounds exceed supported integer range: {0}")]
    Overflow(String),
}

/// Inputs of the wavelength search.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Number of wavelengths, at least 2.
    pub n: usize,
    /// Required identifiable range: `lcm(wavelengths) >= r_max`.
    pub r_max: Rational,
    pub lambda_min: Rational,
    pub lambda_max: Rational,
    /// Objective weight; `None` selects [`gamma_default`].
    pub gamma: Option<f64>,
    /// Resolution cap on the numerators `p_n`, replacing the live bound.
    pub kappa: Option<u64>,
    /// Wall-clock budget; on expiry the best solution so far is returned
    /// with `complete = false`.
    pub time_limit: Option<Duration>,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.n < 2 {
            return Err(SearchError::InvalidConfig(
                "need at least two wavelengths".into(),
            ));
        }
        if !self.lambda_min.is_positive() || self.lambda_min >= self.lambda_max {
            return Err(SearchError::InvalidConfig(
                "require 0 < lambda_min < lambda_max".into(),
            ));
        }
        if !self.r_max.is_positive() {
            return Err(SearchError::InvalidConfig("r_max must be positive".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(SearchError::InvalidConfig(
                    "gamma must be positive and finite".into(),
                ));
            }
        }
        if self.kappa == Some(0) {
            return Err(SearchError::InvalidConfig("kappa must be positive".into()));
        }
        Ok(())
    }

    fn resolved_gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| gamma_default(self))
    }
}

/// Output of the wavelength search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Numerators `p_2..p_N` in ascending order.
    pub p: Vec<u64>,
    /// Denominators `q_2..q_N`, coprime to the matching `p_n`.
    pub q: Vec<u64>,
    /// `{lambda_max, (p_2/q_2) lambda_max, ...}`.
    pub wavelengths: WavelengthSet,
    /// Attained objective value.
    pub objective: f64,
    /// Weight actually used.
    pub gamma: f64,
    /// True when the search space was exhausted (never under a time limit
    /// that expired).
    pub complete: bool,
    pub nodes_visited: u64,
    /// When the returned minimizer was first found.
    pub best_found_at: Duration,
}

/// Default objective weight `N^2 r_max^2 / (lambda_max^2 lambda_min^2)`,
/// which approximately balances the two terms of the objective.
pub fn gamma_default(cfg: &SearchConfig) -> f64 {
    let n = Rational::from_integer((cfg.n as i64).into());
    let exact = &n * &n * &cfg.r_max * &cfg.r_max
        / (&cfg.lambda_max * &cfg.lambda_max * &cfg.lambda_min * &cfg.lambda_min);
    to_real(&exact)
}

/// The objective on an explicit wavelength set:
/// `P^2 sum(lambda^-2) + gamma / sum(lambda^-2)`. The first term equals
/// `||v||^2` exactly.
pub fn objective_l(ws: &WavelengthSet, gamma: f64) -> f64 {
    let sum_inv_sq: f64 = ws.sum_inv_sq();
    let norm_sq = ws.v_norm_sq().to_f64().unwrap_or(f64::INFINITY);
    norm_sq + gamma / sum_inv_sq
}

/// Exact-rational evaluation of the objective, using
/// `sum(lambda^-2) = ||v||^2 / P^2`.
fn objective_l_exact(ws: &WavelengthSet, gamma: &Rational) -> Rational {
    let norm = Rational::from_integer(ws.v_norm_sq());
    let p = ws.period();
    &norm + gamma * p * p / &norm
}

/// The objective in the integer parameterization. `lambda_max_sq` is
/// `lambda_max^2` as a float.
pub fn objective_l2(p: &[u64], q: &[u64], gamma: f64, lambda_max_sq: f64) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut lcm: Option<u128> = Some(1);
    let mut d = 1.0f64;
    for (&pn, &qn) in p.iter().zip(q.iter()) {
        lcm = lcm.and_then(|l| lcm_u128(l, pn));
        let ratio = qn as f64 / pn as f64;
        d += ratio * ratio;
    }
    l2_value(lcm, d, gamma, lambda_max_sq)
}

#[inline]
fn l2_value(lcm: Option<u128>, d: f64, gamma: f64, lambda_max_sq: f64) -> f64 {
    match lcm {
        Some(q) => {
            let qf = q as f64;
            qf * qf * d + gamma * lambda_max_sq / d
        }
        None => f64::INFINITY,
    }
}

/// Relative width of the band around the incumbent objective inside which
/// float evaluation cannot be trusted to order candidates, and the exact
/// rational comparison decides. The float evaluation of `L2` is good to a
/// few 1e-16 relative, so 1e-12 is a wide safety margin while still being
/// far too narrow to slow the search.
const FLOAT_GUARD: f64 = 1e-12;

/// Exact value of `L2(p, q)`; `gamma` and `lambda_max^2` enter as exact
/// rationals (a user-supplied float weight is itself a rational).
fn l2_exact(p: &[u64], q: &[u64], gamma: &Rational, lambda_max_sq: &Rational) -> Rational {
    let mut lcm = Integer::one();
    let mut d = Rational::one();
    for (&pn, &qn) in p.iter().zip(q.iter()) {
        lcm = lcm.lcm(&Integer::from(pn));
        d += Rational::new((qn * qn).into(), (pn * pn).into());
    }
    let q_sq = Rational::from_integer(&lcm * &lcm);
    &q_sq * &d + gamma * lambda_max_sq / &d
}

#[inline]
fn lcm_u128(a: u128, b: u64) -> Option<u128> {
    let b = b as u128;
    let g = a.gcd(&b);
    (a / g).checked_mul(b)
}

/// Seed integer for the initial upper bound: the smallest integer at least
/// `r_max / lambda_max` and at least `lambda_min / (lambda_max - lambda_min)`.
fn seed_integer(cfg: &SearchConfig) -> Result<u64, SearchError> {
    let a = (&cfg.r_max / &cfg.lambda_max).ceil().to_integer();
    let b = (&cfg.lambda_min / (&cfg.lambda_max - &cfg.lambda_min))
        .ceil()
        .to_integer();
    let w = a.max(b).max(Integer::one());
    w.to_u64()
        .ok_or_else(|| SearchError::Overflow("seed integer exceeds u64".into()))
}

/// Initial upper bound: the objective of the always-feasible seed set
/// `{lambda_max, (w/(w+1)) lambda_max, ...}`. Returns the bound and the
/// seed set.
pub fn initial_upper_bound(
    cfg: &SearchConfig,
    gamma: f64,
) -> Result<(f64, WavelengthSet), SearchError> {
    let w = seed_integer(cfg)?;
    let ratio = Rational::new(w.into(), (w + 1).into());
    let mut lambdas = vec![cfg.lambda_max.clone()];
    for _ in 1..cfg.n {
        lambdas.push(&ratio * &cfg.lambda_max);
    }
    let seed = WavelengthSet::new(lambdas)
        .map_err(|e| SearchError::InvalidConfig(format!("seed set invalid: {e}")))?;
    Ok((objective_l(&seed, gamma), seed))
}

/// Runs the depth-first search single-threaded; the reference, fully
/// deterministic path.
pub fn optimize(cfg: &SearchConfig) -> Result<SearchResult, SearchError> {
    optimize_with_threads(cfg, 1)
}

/// Depth-first search over `(p, q)`. With `threads > 1` the top-level
/// `p_2` values are distributed across workers sharing a monotonically
/// decreasing bound; the final result is canonically re-compared so it
/// equals the single-threaded outcome whenever the search runs to
/// completion.
pub fn optimize_with_threads(cfg: &SearchConfig, threads: usize) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let gamma = cfg.resolved_gamma();
    let shape = SearchShape::prepare(cfg, gamma)?;
    let start = Instant::now();

    let seed_candidate = shape.seed_candidate();
    let mut candidates: Vec<Candidate> = Vec::new();
    if let Some(seed) = seed_candidate {
        candidates.push(seed);
    }

    let shared = SharedState {
        best_bits: AtomicU64::new(shape.seed_objective.to_bits()),
        stop: AtomicBool::new(false),
        next_p2: AtomicUsize::new(0),
        nodes: AtomicU64::new(0),
    };
    let deadline = cfg.time_limit.map(|d| start + d);

    let worker_count = threads.max(1).min(shape.p_cap.max(1) as usize);
    if worker_count <= 1 {
        let mut dfs = Dfs::new(&shape, &shared, deadline, start);
        dfs.run_all_levels();
        candidates.extend(dfs.incumbent.take());
    } else {
        let results: Vec<Option<Candidate>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..worker_count)
                .map(|_| {
                    let shape = &shape;
                    let shared = &shared;
                    scope.spawn(move || {
                        let mut dfs = Dfs::new(shape, shared, deadline, start);
                        dfs.run_partitioned();
                        dfs.incumbent.take()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        candidates.extend(results.into_iter().flatten());
    }

    let stopped = shared.stop.load(Ordering::Relaxed);
    let nodes_visited = shared.nodes.load(Ordering::Relaxed);

    // Canonical re-comparison: smallest exact objective, then earliest key
    // in depth-first visit order; the seed carries the always-first key.
    let mut keyed: Vec<(Rational, Candidate)> = candidates
        .into_iter()
        .map(|c| {
            let exact = if c.key.is_empty() {
                shape.seed_exact.clone()
            } else {
                shape.l2_exact(&c.p, &c.q)
            };
            (exact, c)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.key.cmp(&b.1.key)));
    let Some((_, winner)) = keyed.into_iter().next() else {
        return Err(SearchError::Infeasible);
    };

    let mut lambdas = vec![cfg.lambda_max.clone()];
    for (&pn, &qn) in winner.p.iter().zip(winner.q.iter()) {
        lambdas.push(Rational::new(pn.into(), qn.into()) * &cfg.lambda_max);
    }
    let wavelengths = WavelengthSet::new(lambdas).expect("candidate wavelengths valid");

    Ok(SearchResult {
        p: winner.p,
        q: winner.q,
        wavelengths,
        objective: winner.objective,
        gamma,
        complete: !stopped,
        nodes_visited,
        best_found_at: winner.found_at,
    })
}

/// Candidate minimizer with its canonical position in visit order:
/// the interleaved sequence (p_2, q_2, p_3, q_3, ...); the seed uses the
/// empty key, which sorts first.
#[derive(Debug, Clone)]
struct Candidate {
    objective: f64,
    key: Vec<u64>,
    p: Vec<u64>,
    q: Vec<u64>,
    found_at: Duration,
}

/// Immutable data shared by every worker.
struct SearchShape {
    levels: usize,
    n_f: f64,
    gamma: f64,
    gamma_exact: Rational,
    gamma_b: f64,
    lambda_max_sq: f64,
    lambda_max_sq_exact: Rational,
    ratio_num: u128,
    ratio_den: u128,
    lcm_target: u128,
    kappa: Option<u64>,
    seed_objective: f64,
    seed_exact: Rational,
    seed_pq: Option<(Vec<u64>, Vec<u64>)>,
    /// Top-level numerator cap from the initial bound (or kappa); the live
    /// bound can only shrink below it.
    p_cap: u64,
}

impl SearchShape {
    fn prepare(cfg: &SearchConfig, gamma: f64) -> Result<Self, SearchError> {
        let n = cfg.n;
        let (seed_objective, seed_set) = initial_upper_bound(cfg, gamma)?;
        let w = seed_integer(cfg)?;
        let gamma_exact = Rational::from_float(gamma)
            .ok_or_else(|| SearchError::InvalidConfig("gamma must be finite".into()))?;
        let seed_exact = objective_l_exact(&seed_set, &gamma_exact);

        // B = lambda_min^2 lambda_max^2 / (lambda_min^2 + (N-1) lambda_max^2)
        let lmin_sq = &cfg.lambda_min * &cfg.lambda_min;
        let lmax_sq = &cfg.lambda_max * &cfg.lambda_max;
        let b_exact = &lmin_sq * &lmax_sq
            / (&lmin_sq + &lmax_sq * Rational::from_integer(((n - 1) as i64).into()));
        let gamma_b = gamma * to_real::<f64>(&b_exact);
        let lambda_max_sq = to_real::<f64>(&lmax_sq);

        let ratio = &cfg.lambda_max / &cfg.lambda_min;
        let ratio_num = ratio
            .numer()
            .to_u128()
            .ok_or_else(|| SearchError::Overflow("wavelength ratio too large".into()))?;
        let ratio_den = ratio
            .denom()
            .to_u128()
            .ok_or_else(|| SearchError::Overflow("wavelength ratio too large".into()))?;

        let lcm_target = (&cfg.r_max / &cfg.lambda_max)
            .ceil()
            .to_integer()
            .to_u128()
            .ok_or_else(|| SearchError::Overflow("range requirement too large".into()))?
            .max(1);

        let p_cap = match cfg.kappa {
            Some(k) => k,
            None => {
                let bound = ((seed_objective - gamma_b) / n as f64).max(0.0).sqrt();
                if bound > (1u64 << 40) as f64 {
                    return Err(SearchError::Overflow(
                        "numerator bound exceeds supported range".into(),
                    ));
                }
                bound.floor() as u64
            }
        };
        if (p_cap as u128).checked_mul(ratio_num).is_none() {
            return Err(SearchError::Overflow("denominator bound overflows".into()));
        }

        // The seed point participates only when it lies inside the cap.
        let seed_pq = if cfg.kappa.is_none_or(|k| w <= k) {
            Some((vec![w; n - 1], vec![w + 1; n - 1]))
        } else {
            None
        };

        Ok(Self {
            levels: n - 1,
            n_f: n as f64,
            gamma,
            gamma_exact,
            gamma_b,
            lambda_max_sq,
            lambda_max_sq_exact: lmax_sq,
            ratio_num,
            ratio_den,
            lcm_target,
            kappa: cfg.kappa,
            seed_objective,
            seed_exact,
            seed_pq,
            p_cap,
        })
    }

    fn l2_exact(&self, p: &[u64], q: &[u64]) -> Rational {
        l2_exact(p, q, &self.gamma_exact, &self.lambda_max_sq_exact)
    }

    fn seed_candidate(&self) -> Option<Candidate> {
        self.seed_pq.as_ref().map(|(p, q)| Candidate {
            objective: self.seed_objective,
            key: Vec::new(),
            p: p.clone(),
            q: q.clone(),
            found_at: Duration::ZERO,
        })
    }

    #[inline]
    fn q_max(&self, p: u64) -> u64 {
        ((p as u128) * self.ratio_num / self.ratio_den) as u64
    }

    #[inline]
    fn p_in_bound(&self, p: u64, live_bound: f64) -> bool {
        match self.kappa {
            Some(k) => p <= k,
            None => (p as f64) * (p as f64) <= (live_bound - self.gamma_b) / self.n_f,
        }
    }
}

struct SharedState {
    best_bits: AtomicU64,
    stop: AtomicBool,
    next_p2: AtomicUsize,
    nodes: AtomicU64,
}

impl SharedState {
    #[inline]
    fn best(&self) -> f64 {
        f64::from_bits(self.best_bits.load(Ordering::Relaxed))
    }

    fn update_best(&self, value: f64) {
        let mut current = self.best_bits.load(Ordering::Relaxed);
        loop {
            if value >= f64::from_bits(current) {
                return;
            }
            match self.best_bits.compare_exchange_weak(
                current,
                value.to_bits(),
                Ordering::Relaxed,
                Ordering::Relaxed,
            ) {
                Ok(_) => return,
                Err(actual) => current = actual,
            }
        }
    }
}

struct Dfs<'a> {
    shape: &'a SearchShape,
    shared: &'a SharedState,
    deadline: Option<Instant>,
    start: Instant,
    p: Vec<u64>,
    q: Vec<u64>,
    lcm_path: Vec<Option<u128>>,
    d_path: Vec<f64>,
    local_best: f64,
    /// Exact objective of the current acceptance target (the incumbent, or
    /// the seed bound before any leaf is accepted); computed lazily.
    local_best_exact: Option<Rational>,
    incumbent: Option<Candidate>,
    nodes: u64,
    stopped: bool,
}

impl<'a> Dfs<'a> {
    fn new(
        shape: &'a SearchShape,
        shared: &'a SharedState,
        deadline: Option<Instant>,
        start: Instant,
    ) -> Self {
        let levels = shape.levels;
        Self {
            shape,
            shared,
            deadline,
            start,
            p: vec![0; levels],
            q: vec![0; levels],
            lcm_path: vec![None; levels],
            d_path: vec![0.0; levels],
            local_best: shape.seed_objective,
            local_best_exact: None,
            incumbent: None,
            nodes: 0,
            stopped: false,
        }
    }

    /// Reference single-threaded search: iterate p_2 here, recurse below.
    fn run_all_levels(&mut self) {
        self.p[0] = 1;
        loop {
            if self.stopped || !self.shape.p_in_bound(self.p[0], self.pruning_bound()) {
                break;
            }
            self.qsearch(0);
            self.p[0] += 1;
        }
        self.finish();
    }

    /// Worker path: claim top-level p_2 values from the shared counter.
    fn run_partitioned(&mut self) {
        loop {
            if self.stopped || self.shared.stop.load(Ordering::Relaxed) {
                break;
            }
            let idx = self.shared.next_p2.fetch_add(1, Ordering::Relaxed);
            let p2 = idx as u64 + 1;
            if p2 > self.shape.p_cap {
                break;
            }
            if !self.shape.p_in_bound(p2, self.pruning_bound()) {
                // The live bound is monotone in p2, so later candidates
                // cannot re-enter it.
                break;
            }
            self.p[0] = p2;
            self.qsearch(0);
        }
        self.finish();
    }

    fn finish(&mut self) {
        self.shared.nodes.fetch_add(self.nodes, Ordering::Relaxed);
        if self.stopped {
            self.shared.stop.store(true, Ordering::Relaxed);
        }
    }

    /// Pruning reads the shared bound so improvements in any worker tighten
    /// all live branches; single-threaded this is the local incumbent value.
    #[inline]
    fn pruning_bound(&self) -> f64 {
        self.shared.best().min(self.local_best)
    }

    fn psearch(&mut self, level: usize) {
        self.p[level] = self.p[level - 1];
        loop {
            if self.stopped || !self.shape.p_in_bound(self.p[level], self.pruning_bound()) {
                break;
            }
            self.qsearch(level);
            self.p[level] += 1;
        }
    }

    fn qsearch(&mut self, level: usize) {
        let pn = self.p[level];
        let q_max = self.shape.q_max(pn);
        let (lcm_prev, d_prev) = if level == 0 {
            (Some(1u128), 1.0)
        } else {
            (self.lcm_path[level - 1], self.d_path[level - 1])
        };
        let lcm_here = lcm_prev.and_then(|l| lcm_u128(l, pn));
        let mut qn = pn;
        while qn <= q_max {
            if self.stopped {
                return;
            }
            if pn.gcd(&qn) == 1 {
                self.nodes += 1;
                let ratio = qn as f64 / pn as f64;
                let d_here = d_prev + ratio * ratio;
                self.q[level] = qn;
                if level + 1 < self.shape.levels {
                    self.lcm_path[level] = lcm_here;
                    self.d_path[level] = d_here;
                    self.psearch(level + 1);
                } else {
                    self.leaf(lcm_here, d_here);
                }
            }
            qn += 1;
        }
    }

    #[inline]
    fn leaf(&mut self, lcm: Option<u128>, d: f64) {
        let feasible = match lcm {
            Some(l) => l >= self.shape.lcm_target,
            None => true, // overflowed u128, certainly large enough
        };
        if feasible {
            let l2 = l2_value(lcm, d, self.shape.gamma, self.shape.lambda_max_sq);
            let guard = FLOAT_GUARD * self.local_best.abs().max(1.0);
            if l2 < self.local_best - guard {
                self.local_best = l2;
                self.local_best_exact = None;
                self.shared.update_best(l2);
                self.record(l2);
            } else if l2 <= self.local_best + guard && lcm.is_some() {
                // Within float resolution of the incumbent: let exact
                // arithmetic order the pair; strict improvement only.
                let cand = self.shape.l2_exact(&self.p, &self.q);
                if cand < *self.target_exact() {
                    let bound = l2.min(self.local_best);
                    self.local_best = bound;
                    self.local_best_exact = Some(cand);
                    self.shared.update_best(bound);
                    self.record(l2);
                }
            }
        }
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                self.stopped = true;
            }
        }
    }

    /// Exact objective of the current acceptance target, computing and
    /// caching it on first use.
    fn target_exact(&mut self) -> &Rational {
        if self.local_best_exact.is_none() {
            let value = match &self.incumbent {
                Some(c) => self.shape.l2_exact(&c.p, &c.q),
                None => self.shape.seed_exact.clone(),
            };
            self.local_best_exact = Some(value);
        }
        self.local_best_exact.as_ref().unwrap()
    }

    /// Stores the current leaf as incumbent with its own float objective.
    fn record(&mut self, objective: f64) {
        let mut key = Vec::with_capacity(2 * self.shape.levels);
        for (pn, qn) in self.p.iter().zip(self.q.iter()) {
            key.push(*pn);
            key.push(*qn);
        }
        self.incumbent = Some(Candidate {
            objective,
            key,
            p: self.p.clone(),
            q: self.q.clone(),
            found_at: self.start.elapsed(),
        });
    }
}
