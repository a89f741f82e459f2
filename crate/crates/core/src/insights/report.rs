//! Table-shaped summaries of bottom-5% frame rates against player, game and
//! country attributes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::anova::{mean, one_way_anova};
use super::ols::{ols_with_intercept, OlsResult};
use super::tukey::tukey_hsd;
use crate::dataset::PairRecord;
use crate::error::{Error, Result};
use crate::telemetry::records::parse_tags;
use crate::telemetry::{fps_floor_95, CountryRecord, FpsHistogram42, GameRecord, PlayerRecord};

/// Bottom-5% frame rate of one player/game pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorObservation {
    pub player_guid: String,
    pub game_id: String,
    pub floor: f64,
}

pub fn floors_from_pairs(pairs: &[PairRecord]) -> Result<Vec<FloorObservation>> {
    pairs
        .iter()
        .map(|p| {
            Ok(FloorObservation {
                player_guid: p.player_guid.clone(),
                game_id: p.game_id.clone(),
                floor: fps_floor_95(&FpsHistogram42::from_slice(&p.bins)?)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub feature: String,
    #[serde(rename = "DFB")]
    pub dfb: usize,
    #[serde(rename = "DFW")]
    pub dfw: usize,
    #[serde(rename = "F")]
    pub f: f64,
    pub p: f64,
    pub eta2: f64,
    /// Rows were replicated once per tag, so groups are not independent.
    pub tag_expanded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsRow {
    pub feature: String,
    pub coef: f64,
    pub p: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub lower: f64,
    pub upper: f64,
}

impl OlsRow {
    pub fn from_result(r: &OlsResult) -> Vec<OlsRow> {
        (0..r.names.len())
            .map(|i| OlsRow {
                feature: r.names[i].clone(),
                coef: r.coef[i],
                p: r.p[i],
                r2: r.r2,
                lower: r.lower[i],
                upper: r.upper[i],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyRow {
    pub feature: String,
    pub group_a: String,
    pub group_b: String,
    pub diff: f64,
    pub p_adj: f64,
    pub lower: f64,
    pub upper: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightsReport {
    pub anova: Vec<AnovaRow>,
    pub tukey: Vec<TukeyRow>,
    pub hardware_ols: Vec<OlsRow>,
    pub macro_ols: Vec<OlsRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InsightsConfig {
    pub alpha: f64,
    /// Features with more levels than this get no pairwise comparisons.
    pub tukey_max_groups: usize,
    /// Numeric attributes with at most this many distinct values are
    /// treated as factors.
    pub max_numeric_levels: usize,
}

impl Default for InsightsConfig {
    fn default() -> Self {
        InsightsConfig { alpha: 0.05, tukey_max_groups: 30, max_numeric_levels: 16 }
    }
}

/// OLS of mean floor on log10 GDP per capita and Gini; columns
/// `[log10_gdp, gini, intercept]`.
pub fn macro_fit(countries: &[CountryRecord], floors: &BTreeMap<String, f64>) -> Result<OlsResult> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for c in countries {
        let Some(&f) = floors.get(&c.country) else { continue };
        if !(c.gdp_per_capita_usd > 0.0) || !c.gini.is_finite() {
            return Err(Error::InvalidInput(format!("{}: GDP must be positive and Gini finite", c.country)));
        }
        x.push(vec![c.gdp_per_capita_usd.log10(), c.gini]);
        y.push(f);
    }
    if y.len() < 3 {
        return Err(Error::Degenerate(format!("macro fit needs at least 3 countries with GDP, Gini and floors, got {}", y.len())));
    }
    ols_with_intercept(&["log10_gdp", "gini"], &x, &y)
}

type Levels = BTreeMap<String, Vec<f64>>;

fn numeric_level(v: f64) -> String {
    format!("{v}")
}

fn player_factors(p: &PlayerRecord) -> Vec<(&'static str, Option<String>)> {
    let b = |v: Option<bool>| v.map(|x| x.to_string());
    let n = |v: Option<f64>| v.map(numeric_level);
    vec![
        ("windowed_mode", p.windowed_mode.clone()),
        ("mode", p.mode.clone()),
        ("country_name", p.country_name.clone()),
        ("device_age_category", p.device_age_category.clone()),
        ("chassis_type", p.chassis_type.clone()),
        ("model_vendor", p.model_vendor.clone()),
        ("os", p.os.clone()),
        ("ram", n(p.ram)),
        ("cpu_process_node", n(p.cpu_process_node)),
        ("cpu_processor_number", n(p.cpu_processor_number)),
        ("cpu_vendor", p.cpu_vendor.clone()),
        ("cpu_family", p.cpu_family.clone()),
        ("graphics_card_class", p.graphics_card_class.clone()),
        ("discrete_graphics", b(p.discrete_graphics)),
        ("graphics_manuf", p.graphics_manuf.clone()),
        ("vpro_enabled", b(p.vpro_enabled)),
        ("screensize_category", n(p.screensize_category)),
    ]
}

fn game_factors(g: &GameRecord) -> Vec<(&'static str, Option<Vec<String>>, bool)> {
    vec![
        ("category", g.category.clone().map(|c| vec![c]), false),
        ("genres", parse_tags(&g.genres), true),
        ("game_modes", parse_tags(&g.game_modes), true),
        ("player_perspectives", parse_tags(&g.player_perspectives), true),
        ("themes", parse_tags(&g.themes), true),
        ("age_ratings", g.age_ratings.clone().map(|c| vec![c]), false),
    ]
}

const NUMERIC_FACTORS: [&str; 4] = ["ram", "cpu_process_node", "cpu_processor_number", "screensize_category"];

/// Names of the hardware regressors, in design-matrix order.
pub const HARDWARE_COLUMNS: [&str; 4] = ["cpu_processor_number", "ram", "cpu_process_node", "screensize_category"];

fn hardware_row(p: &PlayerRecord) -> Option<Vec<f64>> {
    Some(vec![p.cpu_processor_number?, p.ram?, p.cpu_process_node?, p.screensize_category?])
}

/// Multiple OLS of floor on core count, RAM, process node and screen size.
pub fn hardware_fit(obs: &[FloorObservation], players: &[PlayerRecord]) -> Result<OlsResult> {
    let by_guid: HashMap<&str, &PlayerRecord> = players.iter().map(|p| (p.guid.as_str(), p)).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for o in obs {
        if let Some(row) = by_guid.get(o.player_guid.as_str()).and_then(|p| hardware_row(p)) {
            x.push(row);
            y.push(o.floor);
        }
    }
    ols_with_intercept(&HARDWARE_COLUMNS, &x, &y)
}

/// Mean floor per country over all observations of its players.
pub fn country_mean_floors(obs: &[FloorObservation], players: &[PlayerRecord]) -> BTreeMap<String, f64> {
    let country: HashMap<&str, &str> =
        players.iter().filter_map(|p| Some((p.guid.as_str(), p.country_name.as_deref()?))).collect();
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for o in obs {
        if let Some(c) = country.get(o.player_guid.as_str()) {
            acc.entry(c.to_string()).or_default().push(o.floor);
        }
    }
    acc.into_iter().map(|(c, v)| (c, mean(&v))).collect()
}

fn analyse_factor(feature: &str, levels: &Levels, tag_expanded: bool, cfg: &InsightsConfig, report: &mut InsightsReport) {
    let names: Vec<&String> = levels.keys().collect();
    let groups: Vec<Vec<f64>> = levels.values().cloned().collect();
    if let Ok(a) = one_way_anova(&groups) {
        report.anova.push(AnovaRow {
            feature: feature.to_string(),
            dfb: a.df_between,
            dfw: a.df_within,
            f: a.f,
            p: a.p,
            eta2: a.eta2,
            tag_expanded,
        });
    }
    let kept: Vec<usize> = (0..groups.len()).filter(|&i| groups[i].len() >= 2).collect();
    if kept.len() < 2 || kept.len() > cfg.tukey_max_groups {
        return;
    }
    let sub: Vec<Vec<f64>> = kept.iter().map(|&i| groups[i].clone()).collect();
    if let Ok(t) = tukey_hsd(&sub, cfg.alpha) {
        report.tukey.extend(t.pairs.iter().map(|p| TukeyRow {
            feature: feature.to_string(),
            group_a: names[kept[p.group_a]].clone(),
            group_b: names[kept[p.group_b]].clone(),
            diff: p.diff,
            p_adj: p.p_adj,
            lower: p.lower,
            upper: p.upper,
            reject: p.reject,
        }));
    }
}

/// ANOVA and Tukey tables per attribute, the hardware regression and the
/// country-level fit. Attributes whose groups are degenerate are left out.
pub fn build_report(
    obs: &[FloorObservation],
    players: &[PlayerRecord],
    games: &[GameRecord],
    countries: &[CountryRecord],
    cfg: &InsightsConfig,
) -> Result<InsightsReport> {
    if obs.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    let by_player: HashMap<&str, &PlayerRecord> = players.iter().map(|p| (p.guid.as_str(), p)).collect();
    let by_game: HashMap<&str, &GameRecord> = games.iter().map(|g| (g.id.as_str(), g)).collect();

    let mut player_levels: BTreeMap<&'static str, Levels> = BTreeMap::new();
    let mut game_levels: BTreeMap<&'static str, (Levels, bool)> = BTreeMap::new();
    let mut factor_order: Vec<&'static str> = Vec::new();
    for o in obs {
        if let Some(p) = by_player.get(o.player_guid.as_str()) {
            for (name, level) in player_factors(p) {
                if !factor_order.contains(&name) {
                    factor_order.push(name);
                }
                if let Some(l) = level {
                    player_levels.entry(name).or_default().entry(l).or_default().push(o.floor);
                }
            }
        }
        if let Some(g) = by_game.get(o.game_id.as_str()) {
            for (name, tags, expanded) in game_factors(g) {
                if !factor_order.contains(&name) {
                    factor_order.push(name);
                }
                let entry = game_levels.entry(name).or_insert_with(|| (Levels::new(), expanded));
                for t in tags.into_iter().flatten() {
                    entry.0.entry(t).or_default().push(o.floor);
                }
            }
        }
    }

    let mut report = InsightsReport { anova: vec![], tukey: vec![], hardware_ols: vec![], macro_ols: vec![] };
    for name in factor_order {
        if let Some(levels) = player_levels.get(name) {
            if NUMERIC_FACTORS.contains(&name) && levels.len() > cfg.max_numeric_levels {
                continue;
            }
            analyse_factor(name, levels, false, cfg, &mut report);
        } else if let Some((levels, expanded)) = game_levels.get(name) {
            analyse_factor(name, levels, *expanded, cfg, &mut report);
        }
    }
    if let Ok(r) = hardware_fit(obs, players) {
        report.hardware_ols = OlsRow::from_result(&r);
    }
    if let Ok(r) = macro_fit(countries, &country_mean_floors(obs, players)) {
        report.macro_ols = OlsRow::from_result(&r);
    }
    Ok(report)
}
