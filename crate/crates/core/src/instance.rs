//! Traveling thief instances: the TTP text format, a JSON document form, and
//! a programmatic builder for synthetic cases.
//!
//! City indices are 1-based in every external representation and 0-based
//! inside [`TtpInstance`].

use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unsupported EDGE_WEIGHT_TYPE `{kind}`")]
    UnsupportedEdgeWeight { line: usize, kind: String },
    #[error("line {line}: DIMENSION is {expected} but {found} coordinate lines were read")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: item {item} is assigned to city {city}, outside 2..={cities}")]
    ItemCity {
        line: usize,
        item: usize,
        city: usize,
        cities: usize,
    },
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeWeightType {
    #[serde(rename = "CEIL_2D")]
    Ceil2d,
    Explicit,
}

impl EdgeWeightType {
    fn as_str(self) -> &'static str {
        match self {
            EdgeWeightType::Ceil2d => "CEIL_2D",
            EdgeWeightType::Explicit => "EXPLICIT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub profit: f64,
    pub weight: f64,
    /// 0-based home city; never the depot.
    pub city: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtpInstance {
    pub name: String,
    pub knapsack_data_type: Option<String>,
    pub capacity: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Read from the file and written back out; no objective uses it.
    pub renting_ratio: f64,
    pub edge_weight_type: EdgeWeightType,
    pub coords: Option<Vec<(f64, f64)>>,
    distance: Vec<f64>,
    n: usize,
    items: Vec<Item>,
    items_by_city: Vec<Vec<usize>>,
}

pub fn ceil_2d(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt().ceil()
}

fn ceil_2d_matrix(coords: &[(f64, f64)]) -> Vec<f64> {
    let n = coords.len();
    let mut d = vec![0.0; n * n];
    for u in 0..n {
        for v in (u + 1)..n {
            let w = ceil_2d(coords[u], coords[v]);
            d[u * n + v] = w;
            d[v * n + u] = w;
        }
    }
    d
}

impl TtpInstance {
    fn assemble(
        name: String,
        capacity: f64,
        v_min: f64,
        v_max: f64,
        edge_weight_type: EdgeWeightType,
        coords: Option<Vec<(f64, f64)>>,
        distance: Vec<f64>,
        n: usize,
        items: Vec<Item>,
    ) -> Result<Self, InstanceError> {
        if n < 2 {
            return Err(InstanceError::Invalid(format!("need at least 2 cities, got {n}")));
        }
        if !(capacity > 0.0) || !capacity.is_finite() {
            return Err(InstanceError::Invalid(format!("capacity must be positive, got {capacity}")));
        }
        if !(v_min > 0.0) || !(v_min < v_max) || !v_max.is_finite() {
            return Err(InstanceError::Invalid(format!(
                "speeds must satisfy 0 < v_min < v_max, got v_min={v_min}, v_max={v_max}"
            )));
        }
        debug_assert_eq!(distance.len(), n * n);
        for u in 0..n {
            if distance[u * n + u] != 0.0 {
                return Err(InstanceError::Invalid(format!("non-zero diagonal at city {}", u + 1)));
            }
            for v in 0..n {
                let d = distance[u * n + v];
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(InstanceError::Invalid(format!(
                        "distance ({}, {}) = {d} is not a non-negative number",
                        u + 1,
                        v + 1
                    )));
                }
                if d != distance[v * n + u] {
                    return Err(InstanceError::Asymmetric(u + 1, v + 1));
                }
            }
        }
        let mut items_by_city = vec![Vec::new(); n];
        for (k, item) in items.iter().enumerate() {
            if item.city == 0 || item.city >= n {
                return Err(InstanceError::ItemCity {
                    line: 0,
                    item: k + 1,
                    city: item.city + 1,
                    cities: n,
                });
            }
            if !(item.profit > 0.0) || !(item.weight > 0.0) {
                return Err(InstanceError::Invalid(format!(
                    "item {} needs positive profit and weight",
                    k + 1
                )));
            }
            if item.weight > capacity {
                log::warn!(
                    "item {} (weight {}) exceeds the knapsack capacity {capacity} and can never be picked",
                    k + 1,
                    item.weight
                );
            }
            items_by_city[item.city].push(k);
        }
        Ok(TtpInstance {
            name,
            knapsack_data_type: None,
            capacity,
            v_min,
            v_max,
            renting_ratio: 0.0,
            edge_weight_type,
            coords,
            distance,
            n,
            items,
            items_by_city,
        })
    }

    /// Builds an instance from an explicit distance matrix. Items carry 0-based
    /// city indices.
    pub fn from_matrix(
        distance: &[Vec<f64>],
        items: Vec<Item>,
        capacity: f64,
        v_min: f64,
        v_max: f64,
    ) -> Result<Self, InstanceError> {
        let n = distance.len();
        let mut flat = Vec::with_capacity(n * n);
        for (u, row) in distance.iter().enumerate() {
            if row.len() != n {
                return Err(InstanceError::Invalid(format!(
                    "distance row {} has {} entries, expected {n}",
                    u + 1,
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        Self::assemble(
            "synthetic".to_string(),
            capacity,
            v_min,
            v_max,
            EdgeWeightType::Explicit,
            None,
            flat,
            n,
            items,
        )
    }

    /// Builds a CEIL_2D instance from coordinates.
    pub fn from_coords(
        name: impl Into<String>,
        coords: Vec<(f64, f64)>,
        items: Vec<Item>,
        capacity: f64,
        v_min: f64,
        v_max: f64,
    ) -> Result<Self, InstanceError> {
        let n = coords.len();
        let distance = ceil_2d_matrix(&coords);
        Self::assemble(
            name.into(),
            capacity,
            v_min,
            v_max,
            EdgeWeightType::Ceil2d,
            Some(coords),
            distance,
            n,
            items,
        )
    }

    /// Random CEIL_2D instance with integral profits and weights, for tests
    /// and the demo. Capacity is a fraction of the total item weight so that
    /// the knapsack binds.
    pub fn synthetic(num_cities: usize, num_items: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<(f64, f64)> = (0..num_cities)
            .map(|_| (rng.random_range(0..100) as f64, rng.random_range(0..100) as f64))
            .collect();
        let items: Vec<Item> = (0..num_items)
            .map(|k| {
                let city = if num_cities > 1 { 1 + k % (num_cities - 1) } else { 0 };
                let weight = rng.random_range(1..=20) as f64;
                let profit = (weight + rng.random_range(0..=15) as f64).max(1.0);
                Item { profit, weight, city }
            })
            .collect();
        let total: f64 = items.iter().map(|i| i.weight).sum();
        let heaviest = items.iter().map(|i| i.weight).fold(1.0, f64::max);
        let capacity = (total * 0.6).round().max(heaviest);
        Self::from_coords(
            format!("synthetic-{num_cities}-{num_items}-{seed}"),
            coords,
            items,
            capacity,
            0.1,
            1.0,
        )
        .expect("synthetic instances are valid by construction")
    }

    pub fn num_cities(&self) -> usize {
        self.n
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// Item ids located at `city` (0-based), in file order.
    pub fn items_at(&self, city: usize) -> &[usize] {
        &self.items_by_city[city]
    }

    #[inline]
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        self.distance[u * self.n + v]
    }

    pub fn distance_row(&self, u: usize) -> &[f64] {
        &self.distance[u * self.n..(u + 1) * self.n]
    }

    pub fn max_items_per_city(&self) -> usize {
        self.items_by_city.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// N·(N + max items at one city): the variable count of the padded
    /// permutation-plus-picking layout.
    pub fn padded_variable_count(&self) -> usize {
        self.n * (self.n + self.max_items_per_city())
    }

    /// N² + M: the variable count of the layout actually used for encoding.
    pub fn compact_variable_count(&self) -> usize {
        self.n * self.n + self.items.len()
    }

    /// Recomputes CEIL_2D distances from the coordinates and compares them
    /// with the stored matrix. `None` when the instance has no coordinates.
    pub fn ceil_2d_consistent(&self) -> Option<bool> {
        let coords = self.coords.as_ref()?;
        Some(ceil_2d_matrix(coords) == self.distance)
    }

    /// Serializes to the TTP text format.
    pub fn to_ttp_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "PROBLEM NAME:\t{}", self.name);
        if let Some(kind) = &self.knapsack_data_type {
            let _ = writeln!(out, "KNAPSACK DATA TYPE:\t{kind}");
        }
        let _ = writeln!(out, "DIMENSION:\t{}", self.n);
        let _ = writeln!(out, "NUMBER OF ITEMS:\t{}", self.items.len());
        let _ = writeln!(out, "CAPACITY OF KNAPSACK:\t{}", self.capacity);
        let _ = writeln!(out, "MIN SPEED:\t{}", self.v_min);
        let _ = writeln!(out, "MAX SPEED:\t{}", self.v_max);
        let _ = writeln!(out, "RENTING RATIO:\t{}", self.renting_ratio);
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE:\t{}", self.edge_weight_type.as_str());
        match (&self.coords, self.edge_weight_type) {
            (Some(coords), EdgeWeightType::Ceil2d) => {
                let _ = writeln!(out, "NODE_COORD_SECTION\t(INDEX, X, Y):");
                for (i, (x, y)) in coords.iter().enumerate() {
                    let _ = writeln!(out, "{}\t{}\t{}", i + 1, x, y);
                }
            }
            _ => {
                let _ = writeln!(out, "EDGE_WEIGHT_SECTION");
                for u in 0..self.n {
                    let row: Vec<String> = self.distance_row(u).iter().map(f64::to_string).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
        }
        let _ = writeln!(out, "ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER):");
        for (k, item) in self.items.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", k + 1, item.profit, item.weight, item.city + 1);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    Coords,
    Weights,
    Items,
}

fn header_value<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T, InstanceError> {
    raw.trim().parse().map_err(|_| InstanceError::Parse {
        line,
        msg: format!("cannot parse value `{}` for {key}", raw.trim()),
    })
}

fn field<T: std::str::FromStr>(line: usize, what: &str, raw: Option<&str>) -> Result<T, InstanceError> {
    let raw = raw.ok_or_else(|| InstanceError::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    raw.parse().map_err(|_| InstanceError::Parse {
        line,
        msg: format!("cannot parse {what} `{raw}`"),
    })
}

/// Parses a TTP-format instance.
pub fn parse_instance<R: BufRead>(source: R) -> Result<TtpInstance, InstanceError> {
    let mut name = None;
    let mut data_type = None;
    let mut dimension: Option<usize> = None;
    let mut num_items: Option<usize> = None;
    let mut capacity: Option<f64> = None;
    let mut v_min: Option<f64> = None;
    let mut v_max: Option<f64> = None;
    let mut renting = 0.0;
    let mut edge_type: Option<EdgeWeightType> = None;

    let mut section = Section::Header;
    let mut coords: Vec<(f64, f64)> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut items: Vec<Item> = Vec::new();
    let mut item_lines: Vec<usize> = Vec::new();
    let mut section_start = 0;
    let mut last_line = 0;

    let check_coords = |coords: &[(f64, f64)], dimension: Option<usize>, line: usize| {
        let expected = dimension.unwrap_or(0);
        if coords.len() != expected {
            Err(InstanceError::DimensionMismatch {
                line,
                expected,
                found: coords.len(),
            })
        } else {
            Ok(())
        }
    };

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed == "EOF" {
            continue;
        }
        let upper = trimmed.to_ascii_uppercase();
        if upper.starts_with("NODE_COORD_SECTION") {
            section = Section::Coords;
            section_start = lineno;
            continue;
        }
        if upper.starts_with("EDGE_WEIGHT_SECTION") {
            section = Section::Weights;
            section_start = lineno;
            continue;
        }
        if upper.starts_with("ITEMS SECTION") {
            if section == Section::Coords {
                check_coords(&coords, dimension, lineno)?;
            }
            section = Section::Items;
            section_start = lineno;
            continue;
        }
        match section {
            Section::Header => {
                let (key, value) = trimmed.split_once(':').ok_or_else(|| InstanceError::Parse {
                    line: lineno,
                    msg: format!("expected `KEY: value`, got `{trimmed}`"),
                })?;
                let key = key.trim().to_ascii_uppercase();
                match key.as_str() {
                    "NAME" | "PROBLEM NAME" => name = Some(value.trim().to_string()),
                    "KNAPSACK DATA TYPE" => data_type = Some(value.trim().to_string()),
                    "DIMENSION" => dimension = Some(header_value(lineno, &key, value)?),
                    "NUMBER OF ITEMS" => num_items = Some(header_value(lineno, &key, value)?),
                    "CAPACITY OF KNAPSACK" => capacity = Some(header_value(lineno, &key, value)?),
                    "MIN SPEED" => v_min = Some(header_value(lineno, &key, value)?),
                    "MAX SPEED" => v_max = Some(header_value(lineno, &key, value)?),
                    "RENTING RATIO" => renting = header_value(lineno, &key, value)?,
                    "EDGE_WEIGHT_TYPE" => {
                        edge_type = Some(match value.trim().to_ascii_uppercase().as_str() {
                            "CEIL_2D" => EdgeWeightType::Ceil2d,
                            "EXPLICIT" => EdgeWeightType::Explicit,
                            other => {
                                return Err(InstanceError::UnsupportedEdgeWeight {
                                    line: lineno,
                                    kind: other.to_string(),
                                })
                            }
                        })
                    }
                    "EDGE_WEIGHT_FORMAT" => {
                        if !value.trim().eq_ignore_ascii_case("FULL_MATRIX") {
                            return Err(InstanceError::Parse {
                                line: lineno,
                                msg: format!("only FULL_MATRIX weights are supported, got `{}`", value.trim()),
                            });
                        }
                    }
                    "TYPE" | "COMMENT" => {}
                    _ => {
                        return Err(InstanceError::Parse {
                            line: lineno,
                            msg: format!("unknown header key `{key}`"),
                        })
                    }
                }
            }
            Section::Coords => {
                let mut parts = trimmed.split_whitespace();
                let _index: usize = field(lineno, "node index", parts.next())?;
                let x: f64 = field(lineno, "x coordinate", parts.next())?;
                let y: f64 = field(lineno, "y coordinate", parts.next())?;
                coords.push((x, y));
            }
            Section::Weights => {
                for tok in trimmed.split_whitespace() {
                    weights.push(tok.parse().map_err(|_| InstanceError::Parse {
                        line: lineno,
                        msg: format!("cannot parse edge weight `{tok}`"),
                    })?);
                }
            }
            Section::Items => {
                let mut parts = trimmed.split_whitespace();
                let _index: usize = field(lineno, "item index", parts.next())?;
                let profit: f64 = field(lineno, "profit", parts.next())?;
                let weight: f64 = field(lineno, "weight", parts.next())?;
                let city: usize = field(lineno, "assigned node", parts.next())?;
                let n = dimension.unwrap_or(0);
                if city < 2 || city > n {
                    return Err(InstanceError::ItemCity {
                        line: lineno,
                        item: items.len() + 1,
                        city,
                        cities: n,
                    });
                }
                items.push(Item {
                    profit,
                    weight,
                    city: city - 1,
                });
                item_lines.push(lineno);
            }
        }
    }

    let missing = |key: &str| InstanceError::Parse {
        line: last_line,
        msg: format!("missing header key {key}"),
    };
    let n = dimension.ok_or_else(|| missing("DIMENSION"))?;
    let capacity = capacity.ok_or_else(|| missing("CAPACITY OF KNAPSACK"))?;
    let v_min = v_min.ok_or_else(|| missing("MIN SPEED"))?;
    let v_max = v_max.ok_or_else(|| missing("MAX SPEED"))?;
    let edge_type = edge_type.ok_or_else(|| missing("EDGE_WEIGHT_TYPE"))?;
    if section == Section::Coords {
        check_coords(&coords, dimension, last_line)?;
    }
    if let Some(m) = num_items {
        if m != items.len() {
            return Err(InstanceError::Parse {
                line: last_line,
                msg: format!("NUMBER OF ITEMS is {m} but {} item lines were read", items.len()),
            });
        }
    }

    let (coords, distance) = match edge_type {
        EdgeWeightType::Ceil2d => {
            check_coords(&coords, Some(n), section_start)?;
            let d = ceil_2d_matrix(&coords);
            (Some(coords), d)
        }
        EdgeWeightType::Explicit => {
            if weights.len() != n * n {
                return Err(InstanceError::Parse {
                    line: section_start,
                    msg: format!("expected {} edge weights, read {}", n * n, weights.len()),
                });
            }
            (None, weights)
        }
    };
    let mut inst = TtpInstance::assemble(
        name.unwrap_or_default(),
        capacity,
        v_min,
        v_max,
        edge_type,
        coords,
        distance,
        n,
        items,
    )
    .map_err(|e| match e {
        InstanceError::ItemCity { item, city, cities, .. } => InstanceError::ItemCity {
            line: item_lines.get(item - 1).copied().unwrap_or(0),
            item,
            city,
            cities,
        },
        other => other,
    })?;
    inst.knapsack_data_type = data_type;
    inst.renting_ratio = renting;
    Ok(inst)
}

pub fn parse_instance_str(text: &str) -> Result<TtpInstance, InstanceError> {
    parse_instance(text.as_bytes())
}

/// JSON instance document. Cities are 1-based. Exactly one of `coords`
/// (CEIL_2D distances) or `distance` (explicit matrix) must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDoc {
    #[serde(default)]
    pub name: String,
    pub capacity: f64,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default)]
    pub renting_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<Vec<Vec<f64>>>,
    pub items: Vec<ItemDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemDoc {
    pub profit: f64,
    pub weight: f64,
    pub city: usize,
}

impl InstanceDoc {
    pub fn into_instance(self) -> Result<TtpInstance, InstanceError> {
        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(k, it)| {
                if it.city < 2 {
                    Err(InstanceError::ItemCity {
                        line: 0,
                        item: k + 1,
                        city: it.city,
                        cities: 0,
                    })
                } else {
                    Ok(Item {
                        profit: it.profit,
                        weight: it.weight,
                        city: it.city - 1,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut inst = match (self.coords, self.distance) {
            (Some(c), None) => TtpInstance::from_coords(
                self.name.clone(),
                c.into_iter().map(|[x, y]| (x, y)).collect(),
                items,
                self.capacity,
                self.v_min,
                self.v_max,
            )?,
            (None, Some(d)) => {
                TtpInstance::from_matrix(&d, items, self.capacity, self.v_min, self.v_max)?
            }
            _ => {
                return Err(InstanceError::Invalid(
                    "exactly one of `coords` or `distance` is required".into(),
                ))
            }
        };
        inst.name = self.name;
        inst.renting_ratio = self.renting_ratio;
        Ok(inst)
    }

    pub fn from_instance(inst: &TtpInstance) -> Self {
        let n = inst.num_cities();
        let (coords, distance) = match (&inst.coords, inst.edge_weight_type) {
            (Some(c), EdgeWeightType::Ceil2d) => (Some(c.iter().map(|&(x, y)| [x, y]).collect()), None),
            _ => (None, Some((0..n).map(|u| inst.distance_row(u).to_vec()).collect())),
        };
        InstanceDoc {
            name: inst.name.clone(),
            capacity: inst.capacity,
            v_min: inst.v_min,
            v_max: inst.v_max,
            renting_ratio: inst.renting_ratio,
            coords,
            distance,
            items: inst
                .items()
                .iter()
                .map(|it| ItemDoc {
                    profit: it.profit,
                    weight: it.weight,
                    city: it.city + 1,
                })
                .collect(),
        }
    }
}

pub fn parse_instance_json(text: &str) -> Result<TtpInstance, InstanceError> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    doc.into_instance()
}

/// Loads an instance file, picking the JSON loader for `.json` paths and the
/// TTP text parser otherwise.
pub fn load_instance(path: &std::path::Path) -> Result<TtpInstance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_instance_json(&text)
    } else {
        parse_instance_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "PROBLEM NAME:\tsmall-TTP
KNAPSACK DATA TYPE:\tuncorrelated
DIMENSION:\t4
NUMBER OF ITEMS:\t3
CAPACITY OF KNAPSACK:\t12
MIN SPEED:\t0.1
MAX SPEED:\t1
RENTING RATIO:\t2.5
EDGE_WEIGHT_TYPE:\tCEIL_2D
NODE_COORD_SECTION\t(INDEX, X, Y):
1\t0\t0
2\t3\t4
3\t6\t0
4\t1\t1
ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER):
1\t10\t5\t2
2\t7\t4\t3
3\t4\t3\t3
";

    #[test]
    fn parses_header_and_sections() {
        let inst = parse_instance_str(SMALL).unwrap();
        assert_eq!(inst.num_cities(), 4);
        assert_eq!(inst.num_items(), 3);
        assert_eq!(inst.capacity, 12.0);
        assert_eq!(inst.renting_ratio, 2.5);
        assert_eq!(inst.dist(0, 1), 5.0);
        assert_eq!(inst.dist(0, 3), 2.0); // ceil(sqrt 2)
        assert_eq!(inst.items_at(2), &[1, 2]);
        assert_eq!(inst.max_items_per_city(), 2);
        assert_eq!(inst.padded_variable_count(), 4 * 6);
        assert_eq!(inst.ceil_2d_consistent(), Some(true));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let text = "NAME: x\nDIMENSION: 3\nNUMBER OF ITEMS: 0\nCAPACITY OF KNAPSACK: 5\nMIN SPEED: 0.1\nMAX SPEED: 1\nEDGE_WEIGHT_TYPE: CEIL_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nITEMS SECTION\n";
        match parse_instance_str(text) {
            Err(InstanceError::DimensionMismatch { expected: 3, found: 2, line }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_bad_weight_type() {
        let err = parse_instance_str("NAME: x\nFOO: 1\n").unwrap_err();
        assert!(matches!(err, InstanceError::Parse { line: 2, .. }), "{err}");
        let err = parse_instance_str("NAME: x\nEDGE_WEIGHT_TYPE: GEO\n").unwrap_err();
        assert!(matches!(err, InstanceError::UnsupportedEdgeWeight { line: 2, .. }));
    }

    #[test]
    fn items_at_depot_or_out_of_range_are_rejected() {
        let depot = SMALL.replace("1\t10\t5\t2", "1\t10\t5\t1");
        assert!(matches!(
            parse_instance_str(&depot),
            Err(InstanceError::ItemCity { line: 16, city: 1, .. })
        ));
        let far = SMALL.replace("3\t4\t3\t3", "3\t4\t3\t9");
        assert!(matches!(
            parse_instance_str(&far),
            Err(InstanceError::ItemCity { line: 18, city: 9, .. })
        ));
    }

    #[test]
    fn explicit_matrix_section() {
        let text = "NAME: m\nDIMENSION: 3\nNUMBER OF ITEMS: 1\nCAPACITY OF KNAPSACK: 10\nMIN SPEED: 0.1\nMAX SPEED: 1\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: FULL_MATRIX\nEDGE_WEIGHT_SECTION\n0 5 5\n5 0 5\n5 5 0\nITEMS SECTION\n1 3 10 2\n";
        let inst = parse_instance_str(text).unwrap();
        assert_eq!(inst.dist(2, 1), 5.0);
        assert!(inst.coords.is_none());
        let again = parse_instance_str(&inst.to_ttp_string()).unwrap();
        assert_eq!(again, TtpInstance { name: "m".into(), ..again.clone() });
    }

    #[test]
    fn build_instance_examples() {
        let d = vec![vec![0.0, 5.0, 5.0], vec![5.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]];
        let inst = TtpInstance::from_matrix(&d, vec![], 10.0, 0.1, 1.0).unwrap();
        assert_eq!(inst.num_cities(), 3);
        assert!(inst.coords.is_none());

        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(
            TtpInstance::from_matrix(&asym, vec![], 10.0, 0.1, 1.0),
            Err(InstanceError::Asymmetric(1, 2))
        ));
        assert!(TtpInstance::from_matrix(&d, vec![], 10.0, 1.0, 1.0).is_err());

        // four cities, items only at cities 2 and 3 (two at city 2)
        let d4 = vec![
            vec![0.0, 4.0, 3.0, 5.0],
            vec![4.0, 0.0, 6.0, 3.0],
            vec![3.0, 6.0, 0.0, 4.0],
            vec![5.0, 3.0, 4.0, 0.0],
        ];
        let items = vec![
            Item { profit: 20.0, weight: 2.0, city: 1 },
            Item { profit: 30.0, weight: 3.0, city: 1 },
            Item { profit: 100.0, weight: 3.0, city: 2 },
        ];
        let inst = TtpInstance::from_matrix(&d4, items, 8.0, 0.1, 1.0).unwrap();
        assert_eq!(inst.items_at(1).len(), 2);
        assert!(inst.items_at(3).is_empty());
    }

    #[test]
    fn heavy_item_is_retained() {
        let d = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let items = vec![Item { profit: 1.0, weight: 50.0, city: 1 }];
        let inst = TtpInstance::from_matrix(&d, items, 10.0, 0.1, 1.0).unwrap();
        assert_eq!(inst.num_items(), 1);
    }

    #[test]
    fn json_document_round_trip() {
        let inst = parse_instance_str(SMALL).unwrap();
        let doc = InstanceDoc::from_instance(&inst);
        let text = serde_json::to_string(&doc).unwrap();
        let back = parse_instance_json(&text).unwrap();
        assert_eq!(back.items(), inst.items());
        assert_eq!(back.capacity, inst.capacity);
        for u in 0..4 {
            assert_eq!(back.distance_row(u), inst.distance_row(u));
        }
    }

    #[test]
    fn serialization_round_trip_keeps_header_and_items() {
        let inst = parse_instance_str(SMALL).unwrap();
        let text = inst.to_ttp_string();
        let back = parse_instance_str(&text).unwrap();
        assert_eq!(back, inst);
        for (a, b) in SMALL.lines().zip(text.lines()) {
            let a: Vec<&str> = a.split_whitespace().collect();
            let b: Vec<&str> = b.split_whitespace().collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn synthetic_instances_are_deterministic() {
        let a = TtpInstance::synthetic(6, 5, 3);
        let b = TtpInstance::synthetic(6, 5, 3);
        assert_eq!(a, b);
        assert!(a.items().iter().all(|it| it.city != 0 && it.weight <= a.capacity));
    }
}
