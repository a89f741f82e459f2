//! Synthetic players, games and sessions with planted FPS effects.
//!
//! The mean 95% floor of a player-game pair is
//!
//! ```text
//! μ = eq1(n, r, p, s) + w·(eq2(gdp, gini) − mean eq2) + gpu + genre + u_p + v_g
//! ```
//!
//! clamped below at 5 Hz. Each session perturbs μ by Gaussian noise and
//! draws FPS samples from a log-normal whose 5th percentile sits at the
//! session mean.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path as FsPath;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::distribution::ClassDistribution;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::special::{norm_cdf, norm_pdf, Z95};
use crate::telemetry::{
    bin_lower_edge, io, CountryRecord, FpsHistogram42, GameRecord, PlayerRecord, SessionRecord, WindowedMode,
    CLASS_THRESHOLDS_HZ, NUM_BINS, NUM_CLASSES,
};

/// Seconds between FPS samples.
pub const SAMPLE_INTERVAL_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareCoefficients {
    pub cores: f64,
    pub ram_gb: f64,
    pub process_node_nm: f64,
    pub screen_in: f64,
    pub intercept: f64,
}

impl HardwareCoefficients {
    pub const PLANTED: Self = Self { cores: 6.878, ram_gb: 0.28, process_node_nm: -0.5165, screen_in: 1.8697, intercept: -2.0675 };

    pub fn eval(&self, cores: f64, ram_gb: f64, node_nm: f64, screen_in: f64) -> f64 {
        self.cores * cores + self.ram_gb * ram_gb + self.process_node_nm * node_nm + self.screen_in * screen_in + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroCoefficients {
    pub log10_gdp: f64,
    pub gini: f64,
    pub intercept: f64,
}

impl MacroCoefficients {
    pub const PLANTED: Self = Self { log10_gdp: 12.84, gini: -0.42, intercept: 6.84 };

    pub fn eval(&self, gdp_per_capita_usd: f64, gini: f64) -> f64 {
        self.log10_gdp * gdp_per_capita_usd.log10() + self.gini * gini + self.intercept
    }
}

/// 2018-era GDP per capita (USD) and Gini index, rounded.
pub fn default_countries() -> Vec<CountryRecord> {
    [
        ("Australia", 57_300.0, 34.3),
        ("Brazil", 9_000.0, 53.9),
        ("Canada", 46_300.0, 33.3),
        ("China", 9_900.0, 38.5),
        ("Colombia", 6_700.0, 50.4),
        ("Denmark", 61_400.0, 28.2),
        ("France", 41_500.0, 32.4),
        ("Germany", 47_600.0, 31.9),
        ("Iceland", 74_300.0, 26.1),
        ("India", 2_000.0, 35.7),
        ("Indonesia", 3_900.0, 37.8),
        ("Italy", 34_500.0, 35.9),
        ("Japan", 39_300.0, 32.9),
        ("Mexico", 9_700.0, 45.4),
        ("Namibia", 5_900.0, 59.1),
        ("Norway", 82_000.0, 27.6),
        ("Poland", 15_400.0, 30.2),
        ("Russia", 11_300.0, 37.5),
        ("South Africa", 6_400.0, 63.0),
        ("South Korea", 33_400.0, 31.4),
        ("Spain", 30_400.0, 34.7),
        ("Sweden", 54_600.0, 28.8),
        ("Turkey", 9_300.0, 41.9),
        ("United Kingdom", 42_500.0, 35.1),
        ("United States", 62_900.0, 41.4),
    ]
    .into_iter()
    .map(|(c, g, i)| CountryRecord { country: c.into(), gdp_per_capita_usd: g, gini: i })
    .collect()
}

const GENRES: [(&str, f64); 12] = [
    ("Shooter", -5.0),
    ("Role-playing (RPG)", -3.0),
    ("Adventure", -1.0),
    ("Strategy", 2.0),
    ("Simulator", -2.0),
    ("Racing", -4.0),
    ("Sport", 0.0),
    ("Indie", 5.0),
    ("Puzzle", 6.0),
    ("Platform", 3.0),
    ("Fighting", 1.0),
    ("MOBA", 4.0),
];

const GPU_CLASSES: [(&str, f64, f64); 4] =
    [("Integrated", -6.0, 0.3), ("Entry", -2.0, 0.25), ("Mainstream", 2.0, 0.3), ("Enthusiast", 6.0, 0.15)];

const CORES: [(f64, f64); 5] = [(2.0, 0.1), (4.0, 0.35), (6.0, 0.3), (8.0, 0.2), (16.0, 0.05)];
const RAM_GB: [(f64, f64); 5] = [(4.0, 0.1), (8.0, 0.3), (16.0, 0.4), (32.0, 0.15), (64.0, 0.05)];
const NODE_NM: [(f64, f64); 5] = [(7.0, 0.15), (10.0, 0.25), (14.0, 0.35), (22.0, 0.15), (32.0, 0.1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_players: usize,
    pub n_games: usize,
    /// `None` uses [`default_countries`].
    pub countries: Option<Vec<CountryRecord>>,
    /// Inclusive range of distinct games per player.
    pub games_per_player: [usize; 2],
    /// Inclusive range of sessions per player-game pair.
    pub sessions_per_pair: [usize; 2],
    /// Inclusive range of regular session lengths, seconds.
    pub session_seconds: [f64; 2],
    /// Fraction of sessions made shorter than five minutes.
    pub short_session_rate: f64,
    /// Per-session Gaussian noise on the mean floor, Hz.
    pub noise_std: f64,
    pub player_latent_std: f64,
    pub game_latent_std: f64,
    pub macro_weight: f64,
    /// Log-scale spread of FPS samples within a session. `None` derives it
    /// from `median_ratio`; either way the 5th percentile stays at the
    /// session mean floor.
    pub sigma_log: Option<f64>,
    /// Median FPS over the 95% floor when `sigma_log` is not set.
    pub median_ratio: f64,
    pub genre_effect_scale: f64,
    pub gpu_effect_scale: f64,
    /// Probability that an optional attribute cell is left empty.
    pub missing_rate: f64,
    /// Game popularity ∝ rank^-exponent.
    pub popularity_exponent: f64,
    pub min_mean_hz: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_players: 1000,
            n_games: 50,
            countries: None,
            games_per_player: [3, 8],
            sessions_per_pair: [4, 12],
            session_seconds: [300.0, 3600.0],
            short_session_rate: 0.05,
            noise_std: 5.0,
            player_latent_std: 8.0,
            game_latent_std: 8.0,
            macro_weight: 0.3,
            sigma_log: None,
            median_ratio: 1.3,
            genre_effect_scale: 1.0,
            gpu_effect_scale: 1.0,
            missing_rate: 0.03,
            popularity_exponent: 0.8,
            min_mean_hz: 5.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.n_players == 0 || self.n_games == 0 {
            return bad("n_players and n_games must be at least 1");
        }
        let [gmin, gmax] = self.games_per_player;
        if gmin == 0 || gmin > gmax {
            return bad("games_per_player must be a non-empty range of positive counts");
        }
        let [smin, smax] = self.sessions_per_pair;
        if smin == 0 || smin > smax {
            return bad("sessions_per_pair must be a non-empty range of positive counts");
        }
        let [dmin, dmax] = self.session_seconds;
        if !(dmin >= SAMPLE_INTERVAL_S && dmin <= dmax && dmax.is_finite()) {
            return bad("session_seconds must be a finite range starting at 5 s or more");
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("player_latent_std", self.player_latent_std),
            ("game_latent_std", self.game_latent_std),
            ("genre_effect_scale", self.genre_effect_scale),
            ("gpu_effect_scale", self.gpu_effect_scale),
            ("popularity_exponent", self.popularity_exponent),
            ("macro_weight", self.macro_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        for (name, v) in [("short_session_rate", self.short_session_rate), ("missing_rate", self.missing_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1]")));
            }
        }
        if let Some(s) = self.sigma_log {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("sigma_log must be a non-negative number");
            }
        } else if !(self.median_ratio >= 1.0 && self.median_ratio.is_finite()) {
            return bad("median_ratio must be at least 1");
        }
        if !(self.min_mean_hz > 0.0) {
            return bad("min_mean_hz must be positive");
        }
        let countries = self.countries.clone().unwrap_or_else(default_countries);
        if countries.is_empty() {
            return bad("country table is empty");
        }
        for c in &countries {
            c.validate()?;
        }
        Ok(())
    }

    /// `(sigma_log, median_ratio)` actually used.
    pub fn sample_law(&self) -> (f64, f64) {
        match self.sigma_log {
            Some(s) => (s, (Z95 * s).exp()),
            None => (self.median_ratio.ln() / Z95, self.median_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerTruth {
    pub country: String,
    pub cores: f64,
    pub ram_gb: f64,
    pub process_node_nm: f64,
    pub screen_in: f64,
    pub gpu_class: String,
    pub hardware_term: f64,
    pub macro_term: f64,
    pub gpu_offset: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTruth {
    pub primary_genre: String,
    pub genre_offset: f64,
    pub v: f64,
}

/// Everything needed to recompute the planted mean of any pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub config: GeneratorConfig,
    pub hardware: HardwareCoefficients,
    #[serde(rename = "macro")]
    pub macro_: MacroCoefficients,
    pub macro_weight: f64,
    pub macro_mean: f64,
    pub sigma_log: f64,
    pub median_ratio: f64,
    pub noise_std: f64,
    pub min_mean_hz: f64,
    pub genre_offsets: BTreeMap<String, f64>,
    pub gpu_offsets: BTreeMap<String, f64>,
    pub players: BTreeMap<String, PlayerTruth>,
    pub games: BTreeMap<String, GameTruth>,
}

impl PlantedTruth {
    /// Planted mean floor of a pair before session noise, clamped.
    pub fn pair_mean(&self, player: &str, game: &str) -> Result<f64> {
        let p = self.players.get(player).ok_or_else(|| Error::UnknownId(format!("player {player}")))?;
        let g = self.games.get(game).ok_or_else(|| Error::UnknownId(format!("game {game}")))?;
        Ok((p.hardware_term + p.macro_term + p.gpu_offset + p.u + g.genre_offset + g.v).max(self.min_mean_hz))
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub players: Vec<PlayerRecord>,
    pub games: Vec<GameRecord>,
    pub sessions: Vec<SessionRecord>,
    pub countries: Vec<CountryRecord>,
    pub truth: PlantedTruth,
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, table: &[(T, f64)]) -> T {
    let w = WeightedIndex::new(table.iter().map(|t| t.1)).expect("static weights");
    table[w.sample(rng)].0
}

fn choose_str<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

/// Draws a value, then blanks it with probability `rate`.
fn maybe<T>(rng: &mut ChaCha8Rng, rate: f64, value: impl FnOnce(&mut ChaCha8Rng) -> T) -> Option<T> {
    let v = value(rng);
    if rng.random::<f64>() < rate {
        None
    } else {
        Some(v)
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("validated std")
}

fn tag_subset(rng: &mut ChaCha8Rng, options: &[&str], max: usize) -> Vec<String> {
    let n = rng.random_range(1..=max.min(options.len()));
    let mut picked: Vec<&str> = options.choose_multiple(rng, n).copied().collect();
    picked.sort_unstable();
    picked.into_iter().map(String::from).collect()
}

/// Draws one session's FPS samples around `mean_floor`.
pub fn draw_session_samples(rng: &mut ChaCha8Rng, mean_floor: f64, sigma_log: f64, median_ratio: f64, n: usize) -> Vec<f64> {
    let law = LogNormal::new((mean_floor * median_ratio).ln(), sigma_log).expect("finite log-normal");
    (0..n).map(|_| law.sample(rng)).collect()
}

pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedData> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Stream::Generator);
    let countries = cfg.countries.clone().unwrap_or_else(default_countries);
    let (sigma_log, median_ratio) = cfg.sample_law();
    let hw = HardwareCoefficients::PLANTED;
    let mc = MacroCoefficients::PLANTED;
    let macro_mean = countries.iter().map(|c| mc.eval(c.gdp_per_capita_usd, c.gini)).sum::<f64>() / countries.len() as f64;
    let miss = cfg.missing_rate;

    let genre_offsets: BTreeMap<String, f64> =
        GENRES.iter().map(|&(g, o)| (g.to_owned(), o * cfg.genre_effect_scale)).collect();
    let gpu_offsets: BTreeMap<String, f64> =
        GPU_CLASSES.iter().map(|&(g, o, _)| (g.to_owned(), o * cfg.gpu_effect_scale)).collect();

    let mut games = Vec::with_capacity(cfg.n_games);
    let mut game_truth = BTreeMap::new();
    let game_latent = normal(cfg.game_latent_std);
    let genre_names: Vec<&str> = GENRES.iter().map(|g| g.0).collect();
    for gi in 0..cfg.n_games {
        let id = format!("game-{gi:03}");
        let primary = genre_names[rng.random_range(0..genre_names.len())];
        let mut genres = vec![primary.to_owned()];
        for extra in tag_subset(&mut rng, &genre_names, 2) {
            if rng.random::<f64>() < 0.5 && extra != primary {
                genres.push(extra);
            }
        }
        let v = game_latent.sample(&mut rng);
        game_truth.insert(id.clone(), GameTruth { primary_genre: primary.to_owned(), genre_offset: genre_offsets[primary], v });
        let year = rng.random_range(2005..=2023);
        let month = rng.random_range(1..=12);
        let day = rng.random_range(1..=28);
        let rating = round1(rng.random_range(40.0..95.0));
        let agg = round1((rating + rng.random_range(-8.0..8.0)).clamp(0.0, 100.0));
        let rating_count = rng.random_range(5..5000) as f64;
        let agg_count = rng.random_range(1..60) as f64;
        games.push(GameRecord {
            id,
            category: maybe(&mut rng, miss, |rng| choose_str(rng, &["main_game", "main_game", "main_game", "remake", "expanded_game"]).into()),
            first_release_date: maybe(&mut rng, miss, |_| format!("{year:04}-{month:02}-{day:02}")),
            platforms: maybe(&mut rng, miss, |rng| rng.random_range(1..=6) as f64),
            genres: maybe(&mut rng, miss, |_| genres.join("|")),
            game_modes: maybe(&mut rng, miss, |rng| tag_subset(rng, &["Co-operative", "Multiplayer", "Single player"], 3).join("|")),
            player_perspectives: maybe(
                &mut rng,
                miss,
                |rng| tag_subset(rng, &["Bird view / Isometric", "First person", "Side view", "Third person"], 2).join("|"),
            ),
            themes: maybe(
                &mut rng,
                miss,
                |rng| tag_subset(rng, &["Action", "Fantasy", "Horror", "Open world", "Science fiction", "Survival"], 3).join("|"),
            ),
            language_supports: maybe(&mut rng, miss, |rng| rng.random_range(1..=30) as f64),
            age_ratings: maybe(&mut rng, miss, |rng| choose_str(rng, &["E", "T", "M"]).into()),
            follows: maybe(&mut rng, miss, |rng| rng.random_range(0..20_000) as f64),
            aggregated_rating: maybe(&mut rng, miss, |_| agg),
            aggregated_rating_count: maybe(&mut rng, miss, |_| agg_count),
            rating: maybe(&mut rng, miss, |_| rating),
            rating_count: maybe(&mut rng, miss, |_| rating_count),
            total_rating: maybe(&mut rng, miss, |_| round1((rating + agg) / 2.0)),
            total_rating_count: maybe(&mut rng, miss, |_| rating_count + agg_count),
            dlcs: maybe(&mut rng, miss, |rng| rng.random_bool(0.4)),
            game_localizations: maybe(&mut rng, miss, |rng| rng.random_range(0..=10) as f64),
        });
    }

    let popularity = WeightedIndex::new((0..cfg.n_games).map(|r| ((r + 1) as f64).powf(-cfg.popularity_exponent)))
        .map_err(|e| Error::Config(format!("popularity weights: {e}")))?;
    let player_latent = normal(cfg.player_latent_std);
    let session_noise = normal(cfg.noise_std);
    let mut players = Vec::with_capacity(cfg.n_players);
    let mut player_truth = BTreeMap::new();
    let mut sessions = Vec::new();
    for pi in 0..cfg.n_players {
        let guid = format!("player-{pi:05}");
        let country = &countries[rng.random_range(0..countries.len())];
        let cores = pick(&mut rng, &CORES);
        let ram = pick(&mut rng, &RAM_GB);
        let node = pick(&mut rng, &NODE_NM);
        let screen = round1(rng.random_range(11.0..=32.0));
        let gpu = pick(&mut rng, &GPU_CLASSES.map(|(g, _, w)| (g, w)));
        let u = player_latent.sample(&mut rng);
        let truth = PlayerTruth {
            country: country.country.clone(),
            cores,
            ram_gb: ram,
            process_node_nm: node,
            screen_in: screen,
            gpu_class: gpu.to_owned(),
            hardware_term: hw.eval(cores, ram, node, screen),
            macro_term: cfg.macro_weight * (mc.eval(country.gdp_per_capita_usd, country.gini) - macro_mean),
            gpu_offset: gpu_offsets[gpu],
            u,
        };

        let [gmin, gmax] = cfg.games_per_player;
        let n_games = rng.random_range(gmin..=gmax).min(cfg.n_games);
        let mut chosen: Vec<usize> = Vec::with_capacity(n_games);
        while chosen.len() < n_games {
            let g = popularity.sample(&mut rng);
            if !chosen.contains(&g) {
                chosen.push(g);
            }
        }
        chosen.sort_unstable();
        let mut durations = Vec::new();
        for &g in &chosen {
            let game_id = &games[g].id;
            let gt = &game_truth[game_id];
            let mu = (truth.hardware_term + truth.macro_term + truth.gpu_offset + u + gt.genre_offset + gt.v).max(cfg.min_mean_hz);
            let [smin, smax] = cfg.sessions_per_pair;
            for _ in 0..rng.random_range(smin..=smax) {
                let duration = if rng.random::<f64>() < cfg.short_session_rate {
                    rng.random_range(60.0..300.0_f64).floor()
                } else {
                    rng.random_range(cfg.session_seconds[0]..=cfg.session_seconds[1]).floor()
                };
                let mean = (mu + session_noise.sample(&mut rng)).max(cfg.min_mean_hz);
                let n = ((duration / SAMPLE_INTERVAL_S) as usize).max(1);
                let samples = draw_session_samples(&mut rng, mean, sigma_log, median_ratio, n);
                let histogram = FpsHistogram42::from_samples(&samples)?;
                let avg_fps = round1(samples.iter().sum::<f64>() / n as f64);
                let windowed_mode = match rng.random_range(0..20) {
                    0 => WindowedMode::Unknown,
                    1..=7 => WindowedMode::Window,
                    _ => WindowedMode::Full,
                };
                let game_mode_on = maybe(&mut rng, 0.05, |rng| rng.random_bool(0.5));
                durations.push(duration);
                sessions.push(SessionRecord {
                    player_guid: guid.clone(),
                    game_id: game_id.clone(),
                    duration_s: duration,
                    windowed_mode,
                    game_mode_on,
                    histogram,
                    avg_fps,
                });
            }
        }

        let lifecycle = rng.random_range(90..=1500) as f64;
        let mean_minutes = durations.iter().sum::<f64>() / durations.len() as f64 / 60.0;
        let chassis = if screen <= 17.3 {
            choose_str(&mut rng, &["Notebook", "Notebook", "2 in 1"])
        } else {
            choose_str(&mut rng, &["Desktop", "All in One"])
        };
        let cpu_vendor = choose_str(&mut rng, &["GenuineIntel", "GenuineIntel", "AuthenticAMD"]);
        let cpu_family = if cpu_vendor == "AuthenticAMD" {
            choose_str(&mut rng, &["Ryzen 3", "Ryzen 5", "Ryzen 7"])
        } else {
            choose_str(&mut rng, &["Core i3", "Core i5", "Core i7", "Core i9"])
        };
        let gpu_manuf = if gpu == "Integrated" {
            if cpu_vendor == "AuthenticAMD" { "AMD" } else { "Intel" }
        } else {
            choose_str(&mut rng, &["NVIDIA", "NVIDIA", "AMD"])
        };
        players.push(PlayerRecord {
            guid: guid.clone(),
            avg_session_per_month: maybe(&mut rng, miss, |_| round1(durations.len() as f64 / (lifecycle / 30.0))),
            avg_duration_per_session: maybe(&mut rng, miss, |_| round1(mean_minutes)),
            game_portion: maybe(&mut rng, miss, |rng| (rng.random_range(0.05..0.9_f64) * 1000.0).round() / 1000.0),
            distinct_game_count: maybe(&mut rng, miss, |_| chosen.len() as f64),
            windowed_mode: maybe(&mut rng, miss, |rng| choose_str(rng, &["Full", "Full", "Window"]).into()),
            mode: maybe(&mut rng, miss, |rng| choose_str(rng, &["On", "Off"]).into()),
            country_name: maybe(&mut rng, miss, |_| country.country.clone()),
            device_age_category: maybe(&mut rng, miss, |rng| choose_str(rng, &["0-1y", "1-2y", "2-3y", "3y+"]).into()),
            chassis_type: maybe(&mut rng, miss, |_| chassis.into()),
            model_vendor: maybe(&mut rng, miss, |rng| choose_str(rng, &["Acer", "Asus", "Dell", "HP", "Lenovo", "MSI"]).into()),
            os: maybe(&mut rng, miss, |rng| choose_str(rng, &["Win10", "Win11"]).into()),
            ram: maybe(&mut rng, miss, |_| ram),
            cpu_process_node: maybe(&mut rng, miss, |_| node),
            cpu_processor_number: maybe(&mut rng, miss, |_| cores),
            cpu_vendor: maybe(&mut rng, miss, |_| cpu_vendor.into()),
            cpu_family: maybe(&mut rng, miss, |_| cpu_family.into()),
            graphics_card_class: maybe(&mut rng, miss, |_| gpu.into()),
            discrete_graphics: maybe(&mut rng, miss, |_| gpu != "Integrated"),
            graphics_manuf: maybe(&mut rng, miss, |_| gpu_manuf.into()),
            vpro_enabled: maybe(&mut rng, miss, |rng| rng.random_bool(0.2)),
            report_lifecycle_day: maybe(&mut rng, miss, |_| lifecycle),
            screensize_category: maybe(&mut rng, miss, |_| screen),
            window_desktop_portion: maybe(&mut rng, miss, |rng| (rng.random_range(0.0..1.0_f64) * 1000.0).round() / 1000.0),
        });
        player_truth.insert(guid, truth);
    }

    let truth = PlantedTruth {
        config: cfg.clone(),
        hardware: hw,
        macro_: mc,
        macro_weight: cfg.macro_weight,
        macro_mean,
        sigma_log,
        median_ratio,
        noise_std: cfg.noise_std,
        min_mean_hz: cfg.min_mean_hz,
        genre_offsets,
        gpu_offsets,
        players: player_truth,
        games: game_truth,
    };
    Ok(GeneratedData { players, games, sessions, countries, truth })
}

/// Writes `players.csv`, `games.csv`, `sessions.jsonl`, `countries.csv` and
/// `truth.json` into `dir`.
pub fn write_dataset(dir: &FsPath, data: &GeneratedData) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_csv(&dir.join("players.csv"), &data.players)?;
    io::write_csv(&dir.join("games.csv"), &data.games)?;
    io::write_jsonl(&dir.join("sessions.jsonl"), &data.sessions)?;
    io::write_csv(&dir.join("countries.csv"), &data.countries)?;
    let truth = serde_json::to_string_pretty(&data.truth).map_err(|e| Error::parse("truth.json", e))?;
    let path = dir.join("truth.json");
    fs::write(&path, truth + "\n").map_err(|e| Error::io(&path, e))
}

/// Upper class edges in Hz for a 5- or 42-class target.
pub fn class_edges(num_classes: usize) -> Result<Vec<f64>> {
    match num_classes {
        NUM_CLASSES => Ok(CLASS_THRESHOLDS_HZ.to_vec()),
        NUM_BINS => Ok((1..NUM_BINS).map(bin_lower_edge).collect()),
        k => Err(Error::Config(format!("num_classes must be 5 or 42, got {k}"))),
    }
}

/// Class probabilities of a log-normal sample law via CDF differences at
/// the class edges. `sigma_log == 0` is a point mass at the median.
pub fn lognormal_class_probs(median: f64, sigma_log: f64, edges: &[f64]) -> Vec<f64> {
    let cdf = |x: f64| {
        if sigma_log == 0.0 {
            if median < x { 1.0 } else { 0.0 }
        } else {
            norm_cdf((x.ln() - median.ln()) / sigma_log)
        }
    };
    let mut probs = Vec::with_capacity(edges.len() + 1);
    let mut prev = 0.0;
    for &e in edges {
        let c = cdf(e);
        probs.push((c - prev).max(0.0));
        prev = c;
    }
    probs.push((1.0 - prev).max(0.0));
    probs
}

const NOISE_PANELS: usize = 400;
const NOISE_RANGE: f64 = 8.0;

/// Expected class distribution of a pair under the planted law, averaging
/// over session noise by Simpson's rule.
pub fn truth_oracle(truth: &PlantedTruth, player: &str, game: &str, num_classes: usize) -> Result<ClassDistribution<f64>> {
    let mu = truth.pair_mean(player, game)?;
    let edges = class_edges(num_classes)?;
    let at = |mean: f64| lognormal_class_probs(mean.max(truth.min_mean_hz) * truth.median_ratio, truth.sigma_log, &edges);
    let probs = if truth.noise_std == 0.0 {
        at(mu)
    } else {
        let h = 2.0 * NOISE_RANGE / NOISE_PANELS as f64;
        let mut acc = vec![0.0; edges.len() + 1];
        for i in 0..=NOISE_PANELS {
            let z = -NOISE_RANGE + i as f64 * h;
            let w = if i == 0 || i == NOISE_PANELS { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let p = at(mu + truth.noise_std * z);
            for (a, v) in acc.iter_mut().zip(p) {
                *a += w * norm_pdf(z) * v;
            }
        }
        let total: f64 = acc.iter().sum();
        acc.iter().map(|a| a / total).collect()
    };
    ClassDistribution::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::aggregate_to_classes;

    #[test]
    fn planted_equations() {
        let eq1 = HardwareCoefficients::PLANTED.eval(8.0, 16.0, 10.0, 15.6);
        assert!((eq1 - 81.44).abs() < 5e-3, "{eq1}");
        let eq2 = MacroCoefficients::PLANTED.eval(10_000.0, 30.0);
        assert!((eq2 - 45.6).abs() < 1e-12);
    }

    #[test]
    fn default_sample_law_anchors_fifth_percentile() {
        let (s, m) = GeneratorConfig::default().sample_law();
        assert!((m.ln() - Z95 * s).abs() < 1e-15);
        let (s2, m2) = GeneratorConfig { sigma_log: Some(0.25), ..Default::default() }.sample_law();
        assert_eq!(s2, 0.25);
        assert!((norm_cdf((1.0f64.ln() - m2.ln()) / s2) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn degenerate_config_gives_equal_means_for_equal_hardware() {
        let cfg = GeneratorConfig {
            n_players: 40,
            n_games: 5,
            noise_std: 0.0,
            player_latent_std: 0.0,
            game_latent_std: 0.0,
            genre_effect_scale: 0.0,
            gpu_effect_scale: 0.0,
            countries: Some(vec![CountryRecord { country: "Solo".into(), gdp_per_capita_usd: 10_000.0, gini: 30.0 }]),
            ..Default::default()
        };
        let data = generate(&cfg).unwrap();
        let mut by_hw: BTreeMap<String, f64> = BTreeMap::new();
        for (id, p) in &data.truth.players {
            let key = format!("{}/{}/{}/{}", p.cores, p.ram_gb, p.process_node_nm, p.screen_in);
            for g in data.truth.games.keys() {
                let mu = data.truth.pair_mean(id, g).unwrap();
                let prev = *by_hw.entry(key.clone()).or_insert(mu);
                assert_eq!(prev, mu);
            }
        }
    }

    #[test]
    fn oracle_limits() {
        let p = lognormal_class_probs(50.0, 0.0, &CLASS_THRESHOLDS_HZ);
        assert_eq!(p, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let p = lognormal_class_probs(50.0, 0.2, &CLASS_THRESHOLDS_HZ);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_monte_carlo() {
        let mut rng = stream(99, Stream::Generator);
        let (sigma, ratio) = GeneratorConfig::default().sample_law();
        let mean = 52.0;
        let samples = draw_session_samples(&mut rng, mean, sigma, ratio, 1_000_000);
        let h = FpsHistogram42::from_samples(&samples).unwrap();
        let counts = aggregate_to_classes(&h);
        let analytic = lognormal_class_probs(mean * ratio, sigma, &CLASS_THRESHOLDS_HZ);
        for (c, a) in counts.iter().zip(&analytic) {
            assert!((*c as f64 / 1e6 - a).abs() < 0.01);
        }
        let below = samples.iter().filter(|&&x| x < mean).count() as f64 / 1e6;
        assert!((below - 0.05).abs() < 0.002);
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = GeneratorConfig { n_players: 30, n_games: 6, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.sessions, b.sessions);
        assert_eq!(a.players, b.players);
        assert_eq!(a.truth, b.truth);
        let c = generate(&GeneratorConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.sessions, c.sessions);
    }

    #[test]
    fn config_validation() {
        assert!(GeneratorConfig { n_players: 0, ..Default::default() }.validate().is_err());
        assert!(GeneratorConfig { noise_std: -1.0, ..Default::default() }.validate().is_err());
        assert!(GeneratorConfig { games_per_player: [4, 2], ..Default::default() }.validate().is_err());
        assert!(GeneratorConfig::default().validate().is_ok());
    }

    #[test]
    fn unknown_ids_rejected_by_oracle() {
        let data = generate(&GeneratorConfig { n_players: 3, n_games: 3, ..Default::default() }).unwrap();
        assert!(truth_oracle(&data.truth, "nobody", "game-000", 5).is_err());
        let d = truth_oracle(&data.truth, "player-00000", "game-000", 42).unwrap();
        assert_eq!(d.k(), 42);
    }
}
