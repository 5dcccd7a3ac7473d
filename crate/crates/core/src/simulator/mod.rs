//! Seeded Monte Carlo estimation of layer densities.
//!
//! Replication `i` draws from its own ChaCha stream keyed by `(seed, i)` and
//! all statistics are integer tallies, so results do not depend on how the
//! replications are spread over threads.

mod sampling;
mod trend;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::lattice::{LatticeConfig, LatticeState};

pub use sampling::{sample_arrivals_fixed_count, sample_arrivals_fixed_time, ArrivalSequence};
pub use trend::{mann_kendall, TrendTest, MANN_KENDALL_Z_95};

/// How long each replication runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Poisson arrivals at rate 1 per site up to time `t`.
    FixedTime(f64),
    /// A fixed number of uniformly placed arrivals, used for end-densities.
    FixedArrivals(u64),
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::FixedTime(_) => "fixed_time",
            Mode::FixedArrivals(_) => "fixed_arrivals",
        }
    }

    /// `t` or `M`, rendered for CSV output.
    pub fn parameter(&self) -> String {
        match self {
            Mode::FixedTime(t) => t.to_string(),
            Mode::FixedArrivals(m) => m.to_string(),
        }
    }
}

/// Which columns to report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observe {
    /// The middle site, or the two middle sites pooled when `n_sites` is even.
    Center,
    Sites(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_sites: usize,
    pub mode: Mode,
    pub replications: u64,
    /// Layers `1..=layers` are recorded.
    pub layers: u32,
    pub observe: Observe,
    pub seed: u64,
    pub track_raises: bool,
}

impl RunConfig {
    pub fn new(n_sites: usize, mode: Mode, replications: u64, layers: u32, seed: u64) -> Self {
        Self {
            n_sites,
            mode,
            replications,
            layers,
            observe: Observe::Center,
            seed,
            track_raises: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        LatticeConfig::new(self.n_sites)?;
        if self.replications == 0 {
            return Err(Error::input("replications must be at least 1"));
        }
        if self.layers == 0 {
            return Err(Error::input(
                "the layer range must include at least layer 1",
            ));
        }
        match self.mode {
            Mode::FixedTime(t) => {
                sampling::poisson_sampler(t)?;
            }
            Mode::FixedArrivals(0) => {
                return Err(Error::input(
                    "fixed_arrivals mode needs at least one arrival",
                ));
            }
            Mode::FixedArrivals(_) => {}
        }
        if let Observe::Sites(sites) = &self.observe {
            if sites.is_empty() {
                return Err(Error::input("no sites to observe"));
            }
            if let Some(&x) = sites.iter().find(|&&x| x >= self.n_sites) {
                return Err(Error::SiteOutOfRange {
                    site: x,
                    n_sites: self.n_sites,
                });
            }
        }
        if self.track_raises {
            raise_preconditions(self)?;
        }
        Ok(())
    }
}

/// Arrival budget for end-density runs over layers `1..=layers`:
/// `max(600, 20 n layers)`, i.e. 60 arrivals per layer per three sites.
pub fn recommended_arrivals(n_sites: usize, layers: u32) -> u64 {
    600u64.max(20 * n_sites as u64 * u64::from(layers))
}

/// Column(s) an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteLabel {
    Site(usize),
    /// Average of two adjacent sites.
    Pair(usize, usize),
}

impl fmt::Display for SiteLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteLabel::Site(x) => write!(f, "{x}"),
            SiteLabel::Pair(a, b) => write!(f, "{a}+{b}"),
        }
    }
}

/// Monte Carlo estimate of the occupancy probability of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub site: SiteLabel,
    pub layer: u32,
    pub mean: f64,
    pub replications: u64,
    pub stderr: f64,
}

/// Arrivals that raised the height of the three-site system.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RaiseStats {
    pub raised: u64,
    pub total: u64,
    pub replications: u64,
    /// Sum over replications of the final `|N(left) - N(right)|`.
    pub side_gap_sum: u64,
    pub side_gap_sq_sum: u128,
}

impl RaiseStats {
    pub fn fraction(&self) -> f64 {
        self.raised as f64 / self.total as f64
    }

    pub fn mean_side_gap(&self) -> f64 {
        self.side_gap_sum as f64 / self.replications as f64
    }

    /// Standard error of [`mean_side_gap`](Self::mean_side_gap).
    pub fn side_gap_stderr(&self) -> f64 {
        let n = self.replications as f64;
        let mean = self.mean_side_gap();
        let var = (self.side_gap_sq_sum as f64 / n - mean * mean).max(0.0);
        (var / n).sqrt()
    }
}

/// Centre heights of the three-site system, one entry per replication.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeightStats {
    /// `histogram[h]` counts replications ending at height `h`.
    pub histogram: Vec<u64>,
    /// Replications where the height differed from
    /// `N(centre) + max(N(left), N(right))`.
    pub identity_violations: u64,
}

impl HeightStats {
    pub fn probability(&self, h: usize) -> f64 {
        let total: u64 = self.histogram.iter().sum();
        self.histogram.get(h).copied().unwrap_or(0) as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub estimates: Vec<DensityEstimate>,
    pub raise: Option<RaiseStats>,
    /// Present for three-site runs.
    pub heights: Option<HeightStats>,
    /// Fixed-arrivals replications whose observed cells up to the top layer
    /// could still change.
    pub unsettled: u64,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn estimate(&self, site: SiteLabel, layer: u32) -> Option<&DensityEstimate> {
        self.estimates
            .iter()
            .find(|e| e.site == site && e.layer == layer)
    }

    /// Estimates for one column, ordered by layer.
    pub fn column(&self, site: SiteLabel) -> Vec<&DensityEstimate> {
        self.estimates.iter().filter(|e| e.site == site).collect()
    }
}

/// Lowest layer whose estimated density exceeds `threshold`.
pub fn first_layer_exceeding(column: &[&DensityEstimate], threshold: f64) -> Option<u32> {
    column.iter().find(|e| e.mean > threshold).map(|e| e.layer)
}

fn observed_labels(config: &RunConfig) -> Vec<SiteLabel> {
    match &config.observe {
        Observe::Sites(sites) => sites.iter().map(|&x| SiteLabel::Site(x)).collect(),
        Observe::Center => {
            let lattice = LatticeConfig::new(config.n_sites).expect("validated");
            match lattice.center_sites().as_slice() {
                [x] => vec![SiteLabel::Site(*x)],
                [a, b] => vec![SiteLabel::Pair(*a, *b)],
                _ => unreachable!(),
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Tally {
    // [label][layer - 1]: replications with the label's cell(s) occupied
    occupied: Vec<u64>,
    raise: RaiseStats,
    heights: HeightStats,
    unsettled: u64,
}

impl Tally {
    fn new(cells: usize) -> Self {
        Self {
            occupied: vec![0; cells],
            raise: RaiseStats::default(),
            heights: HeightStats::default(),
            unsettled: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.occupied.iter_mut().zip(&other.occupied) {
            *a += b;
        }
        self.raise.raised += other.raise.raised;
        self.raise.total += other.raise.total;
        self.raise.replications += other.raise.replications;
        self.raise.side_gap_sum += other.raise.side_gap_sum;
        self.raise.side_gap_sq_sum += other.raise.side_gap_sq_sum;
        let h = &mut self.heights.histogram;
        if h.len() < other.heights.histogram.len() {
            h.resize(other.heights.histogram.len(), 0);
        }
        for (a, b) in h.iter_mut().zip(&other.heights.histogram) {
            *a += b;
        }
        self.heights.identity_violations += other.heights.identity_violations;
        self.unsettled += other.unsettled;
        self
    }
}

struct Worker<'a> {
    config: &'a RunConfig,
    labels: &'a [SiteLabel],
    poisson: Option<&'a rand_distr::Poisson<f64>>,
    early_stop: bool,
    state: LatticeState,
    arrivals: Vec<usize>,
    tally: Tally,
}

impl<'a> Worker<'a> {
    fn replicate(&mut self, rep: u64) {
        let cfg = self.config;
        let mut rng = replication_rng(cfg.seed, rep);
        match cfg.mode {
            Mode::FixedTime(_) => sampling::fill_fixed_time_with(
                cfg.n_sites,
                self.poisson,
                &mut rng,
                &mut self.arrivals,
            ),
            Mode::FixedArrivals(m) if self.early_stop => {
                self.replicate_until_frozen(m, &mut rng);
                return;
            }
            Mode::FixedArrivals(m) => {
                sampling::fill_fixed_count(cfg.n_sites, m, &mut rng, &mut self.arrivals)
            }
        }

        let state = &mut self.state;
        state.reset();
        if cfg.track_raises {
            let mut raised = 0;
            for &x in &self.arrivals {
                let top = state.top_layer();
                if state.deposit_unchecked(x) > top {
                    raised += 1;
                }
            }
            let gap = state.arrivals(0).abs_diff(state.arrivals(2));
            let r = &mut self.tally.raise;
            r.raised += raised;
            r.total += self.arrivals.len() as u64;
            r.replications += 1;
            r.side_gap_sum += gap;
            r.side_gap_sq_sum += u128::from(gap) * u128::from(gap);
        } else {
            for &x in &self.arrivals {
                state.deposit_unchecked(x);
            }
        }
        debug_assert!(state.check_invariants().is_ok());
        if matches!(cfg.mode, Mode::FixedArrivals(_)) && !self.all_frozen(cfg.layers) {
            self.tally.unsettled += 1;
        }
        self.record();

        if cfg.n_sites == 3 {
            let state = &self.state;
            let h = state.height_center().expect("three sites") as usize;
            let counts = state.arrival_counts();
            let predicted = counts[1] + counts[0].max(counts[2]);
            let hist = &mut self.tally.heights.histogram;
            if hist.len() <= h {
                hist.resize(h + 1, 0);
            }
            hist[h] += 1;
            if h as u64 != predicted {
                self.tally.heights.identity_violations += 1;
            }
        }
    }

    /// Draws arrivals one at a time, in the same order as
    /// `fill_fixed_count`, and stops as soon as every observed cell is
    /// final. The recorded occupancy is the same as after all `m` arrivals.
    fn replicate_until_frozen(&mut self, m: u64, rng: &mut ChaCha8Rng) {
        let n = self.config.n_sites;
        let layers = self.config.layers;
        self.state.reset();
        let mut frozen = false;
        for i in 0..m {
            let x = rng.random_range(0..n);
            self.state.deposit_unchecked(x);
            if i % FREEZE_CHECK_INTERVAL == FREEZE_CHECK_INTERVAL - 1 && self.all_frozen(layers) {
                frozen = true;
                break;
            }
        }
        if !frozen && !self.all_frozen(layers) {
            self.tally.unsettled += 1;
        }
        debug_assert!(self.state.check_invariants().is_ok());
        self.record();
    }

    fn all_frozen(&mut self, layers: u32) -> bool {
        let state = &mut self.state;
        self.labels.iter().all(|label| match *label {
            SiteLabel::Site(x) => state.frozen_layers(x) >= layers,
            SiteLabel::Pair(a, b) => {
                state.frozen_layers(a) >= layers && state.frozen_layers(b) >= layers
            }
        })
    }

    fn record(&mut self) {
        let cfg = self.config;
        let state = &self.state;
        let layers = cfg.layers as usize;
        for (i, label) in self.labels.iter().enumerate() {
            let cells = &mut self.tally.occupied[i * layers..(i + 1) * layers];
            for (r, cell) in cells.iter_mut().enumerate() {
                let layer = r as u32 + 1;
                let hit = match *label {
                    SiteLabel::Site(x) => state.occupied(x as i64, layer),
                    SiteLabel::Pair(a, b) => {
                        state.occupied(a as i64, layer) || state.occupied(b as i64, layer)
                    }
                };
                *cell += u64::from(hit);
            }
        }
    }
}

const FREEZE_CHECK_INTERVAL: u64 = 32;

/// Random stream of replication `rep`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Runs all replications on the current rayon pool.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_impl(config, true)
}

fn run_impl(config: &RunConfig, allow_early_stop: bool) -> Result<RunOutput> {
    config.validate()?;
    let labels = observed_labels(config);
    let layers = config.layers as usize;
    let cells = labels.len() * layers;
    let poisson = match config.mode {
        Mode::FixedTime(t) => sampling::poisson_sampler(t)?,
        Mode::FixedArrivals(_) => None,
    };
    let lattice = LatticeConfig::new(config.n_sites)?;
    // Stopping early would change the raise and height statistics.
    let early_stop = allow_early_stop && !config.track_raises && config.n_sites != 3;

    let tally = (0..config.replications)
        .into_par_iter()
        .fold(
            || Worker {
                config,
                labels: &labels,
                poisson: poisson.as_ref(),
                early_stop,
                state: LatticeState::new(lattice),
                arrivals: Vec::new(),
                tally: Tally::new(cells),
            },
            |mut w, rep| {
                w.replicate(rep);
                w
            },
        )
        .map(|w| w.tally)
        .reduce(|| Tally::new(cells), Tally::merge);

    let reps = config.replications;
    let n = reps as f64;
    let mut estimates = Vec::with_capacity(cells);
    for (i, &site) in labels.iter().enumerate() {
        for r in 0..layers {
            let hits = tally.occupied[i * layers + r] as f64;
            let p = hits / n;
            let (mean, stderr) = match site {
                SiteLabel::Site(_) => (p, (p * (1.0 - p) / n).sqrt()),
                // per-replication value is 0 or 1/2
                SiteLabel::Pair(..) => (p / 2.0, 0.5 * (p * (1.0 - p) / n).sqrt()),
            };
            estimates.push(DensityEstimate {
                site,
                layer: r as u32 + 1,
                mean,
                replications: reps,
                stderr,
            });
        }
    }

    let mut warnings = Vec::new();
    if let Mode::FixedArrivals(m) = config.mode {
        let needed = recommended_arrivals(config.n_sites, config.layers);
        if m < needed {
            warnings.push(format!(
                "{m} arrivals may not settle layers up to {}; at least {needed} recommended",
                config.layers
            ));
        }
        if tally.unsettled > 0 {
            warnings.push(format!(
                "{} of {reps} replications ended with observed cells up to layer {} still open",
                tally.unsettled, config.layers
            ));
        }
    }

    Ok(RunOutput {
        estimates,
        raise: config.track_raises.then_some(tally.raise),
        heights: (config.n_sites == 3).then_some(tally.heights),
        unsettled: tally.unsettled,
        warnings,
    })
}

/// Like [`run`], on a dedicated pool of `threads` workers (0 = all cores).
pub fn run_with_threads(config: &RunConfig, threads: usize) -> Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::input(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run(config))
}

fn raise_preconditions(config: &RunConfig) -> Result<()> {
    if config.n_sites != 3 {
        return Err(Error::Unsupported(format!(
            "raise statistics need the three-site system, got {} sites",
            config.n_sites
        )));
    }
    if !matches!(config.mode, Mode::FixedArrivals(_)) {
        return Err(Error::Unsupported(
            "raise statistics need fixed_arrivals mode".into(),
        ));
    }
    Ok(())
}

/// Fraction of arrivals that increase the centre height of the three-site
/// system, together with the final side imbalance `|N(left) - N(right)|`.
pub fn raise_fraction(config: &RunConfig) -> Result<RaiseStats> {
    raise_preconditions(config)?;
    let config = RunConfig {
        track_raises: true,
        ..config.clone()
    };
    Ok(run(&config)?.raise.expect("raise tracking enabled"))
}

pub const ESTIMATES_CSV_HEADER: &str = "site,layer,mean,stderr,replications,mode,t_or_M,seed";

/// CSV rendering of the estimates, header included.
pub fn estimates_csv(config: &RunConfig, output: &RunOutput) -> String {
    let mut out = String::from(ESTIMATES_CSV_HEADER);
    out.push('\n');
    for e in &output.estimates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.site,
            e.layer,
            sig(e.mean, 10),
            sig(e.stderr, 10),
            e.replications,
            config.mode.name(),
            config.mode.parameter(),
            config.seed,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_site(mode: Mode, reps: u64, layers: u32) -> RunConfig {
        RunConfig::new(3, mode, reps, layers, 11)
    }

    #[test]
    fn validation() {
        assert!(three_site(Mode::FixedArrivals(0), 1, 1).validate().is_err());
        assert!(three_site(Mode::FixedArrivals(5), 0, 1).validate().is_err());
        assert!(three_site(Mode::FixedArrivals(5), 1, 0).validate().is_err());
        assert!(three_site(Mode::FixedTime(-1.0), 1, 1).validate().is_err());
        let mut c = three_site(Mode::FixedTime(1.0), 1, 1);
        c.observe = Observe::Sites(vec![3]);
        assert!(c.validate().is_err());
        let mut c = RunConfig::new(5, Mode::FixedArrivals(10), 1, 1, 0);
        c.track_raises = true;
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn first_arrival_always_lands_on_layer_one() {
        let mut c = three_site(Mode::FixedArrivals(1), 1000, 2);
        c.observe = Observe::Sites(vec![0, 1, 2]);
        let out = run(&c).unwrap();
        let layer1: f64 = (0..3)
            .map(|x| out.estimate(SiteLabel::Site(x), 1).unwrap().mean)
            .sum();
        assert!((layer1 - 1.0).abs() < 1e-12);
        let layer2: f64 = (0..3)
            .map(|x| out.estimate(SiteLabel::Site(x), 2).unwrap().mean)
            .sum();
        assert_eq!(layer2, 0.0);
    }

    #[test]
    fn single_arrival_always_raises() {
        let stats = raise_fraction(&three_site(Mode::FixedArrivals(1), 50, 1)).unwrap();
        assert_eq!(stats.raised, 50);
        assert_eq!(stats.total, 50);
        assert_eq!(stats.fraction(), 1.0);
    }

    #[test]
    fn raise_requires_three_sites_and_fixed_arrivals() {
        let c = RunConfig::new(4, Mode::FixedArrivals(10), 1, 1, 0);
        assert!(matches!(raise_fraction(&c), Err(Error::Unsupported(_))));
        let c = three_site(Mode::FixedTime(1.0), 1, 1);
        assert!(matches!(raise_fraction(&c), Err(Error::Unsupported(_))));
    }

    #[test]
    fn stderr_is_bernoulli() {
        let out = run(&three_site(Mode::FixedTime(1.0), 2000, 3)).unwrap();
        for e in &out.estimates {
            let expected = (e.mean * (1.0 - e.mean) / 2000.0).sqrt();
            assert_eq!(e.stderr, expected);
        }
    }

    #[test]
    fn even_sizes_pool_the_middle_pair() {
        let out = run(&RunConfig::new(4, Mode::FixedArrivals(200), 500, 3, 2)).unwrap();
        assert_eq!(out.estimates.len(), 3);
        assert!(out
            .estimates
            .iter()
            .all(|e| e.site == SiteLabel::Pair(1, 2)));
        assert!(out.estimates.iter().all(|e| e.mean <= 0.5));
        assert!(out.heights.is_none());
    }

    #[test]
    fn short_budgets_warn() {
        let out = run(&three_site(Mode::FixedArrivals(50), 10, 10)).unwrap();
        assert_eq!(out.warnings.len(), 1);
        let out = run(&three_site(Mode::FixedArrivals(600), 10, 10)).unwrap();
        assert!(out.warnings.is_empty());
        assert_eq!(recommended_arrivals(3, 10), 600);
        assert_eq!(recommended_arrivals(9, 50), 9000);
    }

    #[test]
    fn csv_rows() {
        let c = three_site(Mode::FixedArrivals(600), 10, 2);
        let out = run(&c).unwrap();
        let csv = estimates_csv(&c, &out);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], ESTIMATES_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,1,"));
        assert!(lines[1].ends_with(",10,fixed_arrivals,600,11"));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let c = three_site(Mode::FixedTime(2.0), 3000, 5);
        let one = run_with_threads(&c, 1).unwrap();
        let four = run_with_threads(&c, 4).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn early_stop_matches_full_run() {
        for n in [4, 5, 9] {
            let cfg = RunConfig::new(n, Mode::FixedArrivals(1200), 300, 12, 11);
            let fast = run_impl(&cfg, true).unwrap();
            let full = run_impl(&cfg, false).unwrap();
            assert_eq!(fast.estimates, full.estimates);
            assert_eq!(fast.unsettled, full.unsettled);
        }
    }

    #[test]
    fn short_runs_are_reported_unsettled() {
        let cfg = RunConfig::new(7, Mode::FixedArrivals(5), 50, 10, 3);
        let out = run(&cfg).unwrap();
        assert_eq!(out.unsettled, 50);
        assert!(out.warnings.iter().any(|w| w.contains("still open")));
    }
}
