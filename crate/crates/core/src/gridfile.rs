//! Grid file format.
//!
//! ```text
//! [grid]
//! name = threebus
//! slack = 0            # label of the slack bus (default "0")
//! v0 = 1.0             # squared voltages
//! v_min = 0.81
//! v_max = 1.21
//! allow_zero_shunt = false
//!
//! [base]
//! s_base = 5e6         # VA
//! v_base = 24.9e3      # V
//! f_base = 50          # Hz
//! current_base = three_phase   # or single_phase
//!
//! [raw]                # optional per-km defaults for lines given by length
//! r_ohm_per_km = 0.193
//! l_mh_per_km = 0.38
//! c_uf_per_km = 0.24
//! i_max_a = 120
//!
//! [bus 1]
//! p = -0.21            # shorthand for p_min = p_max
//! q_min = -0.2
//! q_max = 0.1
//! injection = box      # or `fixed_pf <rho> lagging|leading`, `min_pf <rho>`
//!
//! [line 1]             # the line whose downstream bus is bus 1
//! up = 0
//! r = 0.01
//! x = 0.02
//! b = 0.001            # per end
//! i_max_sq = 1.0       # or i_max_a with a current base
//! ```
//!
//! Labels are arbitrary tokens. The parser relabels buses `1..=L` in
//! breadth-first order from the slack and keeps the external labels in
//! [`RadialGrid::labels`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{to_per_unit, Bus, CurrentBase, InjectionSet, Line, PerUnitBase, RadialGrid, ValidationOptions};
use crate::kvtext::{self, Section, Writer};

const GRID_KEYS: &[&str] = &["name", "slack", "v0", "v_min", "v_max", "allow_zero_shunt", "check_voltage_band"];
const BASE_KEYS: &[&str] = &["s_base", "v_base", "f_base", "current_base"];
const RAW_KEYS: &[&str] = &["r_ohm_per_km", "l_mh_per_km", "c_uf_per_km", "i_max_a"];
const BUS_KEYS: &[&str] = &["p", "q", "p_min", "p_max", "q_min", "q_max", "injection", "p_load", "q_load", "dg"];
const LINE_KEYS: &[&str] =
    &["up", "r", "x", "b", "i_max_sq", "i_max_a", "length_km", "r_ohm_per_km", "l_mh_per_km", "c_uf_per_km"];

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::Syntax { line, msg: msg.into() }
}

fn parse_injection(s: &Section) -> Result<InjectionSet> {
    let Some(entry) = s.get("injection") else { return Ok(InjectionSet::Box) };
    let words: Vec<&str> = entry.value.split_whitespace().collect();
    let rho = |w: Option<&&str>| -> Result<f64> {
        w.and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| syntax(entry.line, format!("injection `{}`: missing power factor", entry.value)))
    };
    match words.first().copied() {
        Some("box") if words.len() == 1 => Ok(InjectionSet::Box),
        Some("fixed_pf") => {
            let rho = rho(words.get(1))?;
            let lagging = match words.get(2).copied() {
                Some("lagging") | None => true,
                Some("leading") => false,
                Some(other) => return Err(syntax(entry.line, format!("expected lagging/leading, got `{other}`"))),
            };
            Ok(InjectionSet::FixedPowerFactor { rho, lagging })
        }
        Some("min_pf") => Ok(InjectionSet::MinPowerFactor { rho: rho(words.get(1))? }),
        _ => Err(syntax(entry.line, format!("unknown injection set `{}`", entry.value))),
    }
}

fn pair(s: &Section, fixed: &str, lo: &str, hi: &str) -> Result<(f64, f64)> {
    let fixed_val = s.get_f64(fixed)?;
    let lo_val = s.get_f64(lo)?;
    let hi_val = s.get_f64(hi)?;
    match (fixed_val, lo_val, hi_val) {
        (Some(v), None, None) => Ok((v, v)),
        (Some(_), _, _) => Err(syntax(s.line, format!("[{}]: `{fixed}` excludes `{lo}`/`{hi}`", s.header()))),
        (None, lo, hi) => Ok((lo.unwrap_or(0.0), hi.unwrap_or(0.0))),
    }
}

struct RawDefaults {
    r: Option<f64>,
    l: Option<f64>,
    c: Option<f64>,
    i_max_a: Option<f64>,
}

pub fn parse_grid(text: &str) -> Result<RadialGrid> {
    let sections = kvtext::parse(text)?;

    let mut grid_sec: Option<&Section> = None;
    let mut base_sec: Option<&Section> = None;
    let mut raw_sec: Option<&Section> = None;
    let mut bus_secs: Vec<&Section> = Vec::new();
    let mut line_secs: Vec<&Section> = Vec::new();
    for s in &sections {
        let slot = match s.kind.as_str() {
            "grid" => &mut grid_sec,
            "base" => &mut base_sec,
            "raw" => &mut raw_sec,
            "bus" | "line" => {
                if s.label.is_none() {
                    return Err(syntax(s.line, format!("[{}] needs a label", s.kind)));
                }
                if s.kind == "bus" {
                    bus_secs.push(s)
                } else {
                    line_secs.push(s)
                }
                continue;
            }
            other => return Err(syntax(s.line, format!("unknown section [{other}]"))),
        };
        if slot.is_some() {
            return Err(syntax(s.line, format!("duplicate section [{}]", s.kind)));
        }
        if s.label.is_some() {
            return Err(syntax(s.line, format!("[{}] takes no label", s.kind)));
        }
        *slot = Some(s);
    }

    let g = grid_sec.ok_or_else(|| syntax(1, "missing [grid] section"))?;
    g.check_keys(GRID_KEYS)?;
    let name = g.get_str("name").unwrap_or("grid").to_string();
    let slack = g.get_str("slack").unwrap_or("0").to_string();
    let v0 = g.get_f64("v0")?.unwrap_or(1.0);
    let v_min = g.require_f64("v_min")?;
    let v_max = g.require_f64("v_max")?;
    let options = ValidationOptions {
        allow_zero_shunt: g.get_bool("allow_zero_shunt")?.unwrap_or(false),
        check_voltage_band: g.get_bool("check_voltage_band")?.unwrap_or(true),
    };

    let mut base = PerUnitBase::default();
    if let Some(b) = base_sec {
        b.check_keys(BASE_KEYS)?;
        base.s_base = b.get_f64("s_base")?.unwrap_or(base.s_base);
        base.v_base = b.get_f64("v_base")?.unwrap_or(base.v_base);
        base.f_base = b.get_f64("f_base")?.unwrap_or(base.f_base);
        if let Some(e) = b.get("current_base") {
            base.current = match e.value.as_str() {
                "three_phase" => CurrentBase::ThreePhase,
                "single_phase" => CurrentBase::SinglePhase,
                other => return Err(syntax(e.line, format!("unknown current_base `{other}`"))),
            };
        }
        base.validate().map_err(|e| syntax(b.line, e.to_string()))?;
    }

    let raw = match raw_sec {
        Some(r) => {
            r.check_keys(RAW_KEYS)?;
            RawDefaults {
                r: r.get_f64("r_ohm_per_km")?,
                l: r.get_f64("l_mh_per_km")?,
                c: r.get_f64("c_uf_per_km")?,
                i_max_a: r.get_f64("i_max_a")?,
            }
        }
        None => RawDefaults { r: None, l: None, c: None, i_max_a: None },
    };

    // Topology: line label = downstream bus label.
    let mut line_by_label: HashMap<&str, &Section> = HashMap::new();
    for s in &line_secs {
        let label = s.label.as_deref().unwrap();
        if label == slack {
            return Err(Error::Validation(format!("line {label} ends at the slack bus")));
        }
        if line_by_label.insert(label, s).is_some() {
            return Err(Error::Validation(format!("bus {label} has two upstream lines (multiple parents)")));
        }
    }
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    for s in &line_secs {
        s.check_keys(LINE_KEYS)?;
        let up = s.get_str("up").ok_or_else(|| syntax(s.line, format!("[{}] is missing `up`", s.header())))?;
        if up != slack && !line_by_label.contains_key(up) {
            return Err(Error::Validation(format!(
                "line {} hangs from bus {up}, which has no upstream line and is not the slack",
                s.label.as_deref().unwrap()
            )));
        }
        children.entry(up).or_default().push(s.label.as_deref().unwrap());
    }
    let mut order: Vec<&str> = vec![slack.as_str()];
    let mut head = 0;
    while head < order.len() {
        let k = order[head];
        head += 1;
        if let Some(ch) = children.get(k) {
            order.extend(ch.iter().copied());
        }
    }
    if order.len() != line_secs.len() + 1 {
        let reached: std::collections::HashSet<&str> = order.iter().copied().collect();
        let lost = line_secs.iter().map(|s| s.label.as_deref().unwrap()).find(|l| !reached.contains(l)).unwrap();
        return Err(Error::Validation(format!("bus {lost} is not connected to the slack bus (cycle)")));
    }
    let index: HashMap<&str, usize> = order.iter().enumerate().map(|(i, l)| (*l, i)).collect();

    let mut lines = Vec::with_capacity(line_secs.len());
    for s in &line_secs {
        let label = s.label.as_deref().unwrap();
        let id = index[label];
        let up = index[s.get_str("up").unwrap()];
        let (r, x, b) = match s.get_f64("length_km")? {
            Some(len) => {
                let pick = |key: &str, default: Option<f64>| -> Result<f64> {
                    s.get_f64(key)?.or(default).ok_or_else(|| {
                        syntax(s.line, format!("[{}] gives length_km but no `{key}` (line or [raw])", s.header()))
                    })
                };
                if s.get("r").is_some() || s.get("x").is_some() || s.get("b").is_some() {
                    return Err(syntax(s.line, format!("[{}]: length_km excludes r/x/b", s.header())));
                }
                to_per_unit(
                    pick("r_ohm_per_km", raw.r)?,
                    pick("l_mh_per_km", raw.l)?,
                    pick("c_uf_per_km", raw.c)?,
                    len,
                    &base,
                )
                .map_err(|e| syntax(s.line, e.to_string()))?
            }
            None => (s.require_f64("r")?, s.require_f64("x")?, s.require_f64("b")?),
        };
        let i_max_sq = match (s.get_f64("i_max_sq")?, s.get_f64("i_max_a")?.or(raw.i_max_a)) {
            (Some(v), _) => v,
            (None, Some(amps)) => (amps / base.i_base()).powi(2),
            (None, None) => return Err(syntax(s.line, format!("[{}] needs i_max_sq or i_max_a", s.header()))),
        };
        lines.push(Line { id, up, r, x, b, i_max_sq });
    }

    let mut buses: Vec<Option<Bus>> = vec![None; line_secs.len() + 1];
    for s in &bus_secs {
        s.check_keys(BUS_KEYS)?;
        let label = s.label.as_deref().unwrap();
        if label == slack {
            if !s.entries.is_empty() {
                return Err(syntax(s.line, "the slack bus takes no injection bounds"));
            }
            continue;
        }
        let id =
            *index.get(label).ok_or_else(|| Error::Validation(format!("bus {label} is not connected by any line")))?;
        if buses[id].is_some() {
            return Err(syntax(s.line, format!("duplicate [bus {label}]")));
        }
        let (p_min, p_max) = pair(s, "p", "p_min", "p_max")?;
        let (q_min, q_max) = pair(s, "q", "q_min", "q_max")?;
        buses[id] = Some(Bus {
            id,
            p_min,
            p_max,
            q_min,
            q_max,
            injection_set: parse_injection(s)?,
            p_load: s.get_f64("p_load")?.unwrap_or(p_max),
            q_load: s.get_f64("q_load")?.unwrap_or(q_max),
            dg: s.get_f64("dg")?.unwrap_or(0.0),
        });
    }
    let buses: Vec<Bus> =
        buses.into_iter().enumerate().skip(1).map(|(id, b)| b.unwrap_or_else(|| Bus::fixed(id, 0.0, 0.0))).collect();

    let mut grid = RadialGrid::new(name, v0, v_min, v_max, buses, lines, base, options)?;
    grid.labels = order.iter().map(|s| s.to_string()).collect();
    Ok(grid)
}

pub fn read_grid(path: impl AsRef<std::path::Path>) -> Result<RadialGrid> {
    parse_grid(&std::fs::read_to_string(path)?)
}

/// Serializes a grid in per-unit form. Labels are written as they are stored.
pub fn write_grid(grid: &RadialGrid) -> String {
    let mut w = Writer::new();
    w.section("grid", None)
        .kv("name", &grid.name)
        .kv("slack", grid.label(0))
        .kv("v0", grid.v0)
        .kv("v_min", grid.v_min)
        .kv("v_max", grid.v_max);
    if grid.options.allow_zero_shunt {
        w.kv("allow_zero_shunt", true);
    }
    if !grid.options.check_voltage_band {
        w.kv("check_voltage_band", false);
    }
    w.section("base", None)
        .kv("s_base", grid.base.s_base)
        .kv("v_base", grid.base.v_base)
        .kv("f_base", grid.base.f_base)
        .kv(
            "current_base",
            match grid.base.current {
                CurrentBase::ThreePhase => "three_phase",
                CurrentBase::SinglePhase => "single_phase",
            },
        );
    for (i, bus) in grid.buses.iter().enumerate() {
        w.section("bus", Some(grid.label(i + 1)))
            .kv("p_min", bus.p_min)
            .kv("p_max", bus.p_max)
            .kv("q_min", bus.q_min)
            .kv("q_max", bus.q_max)
            .kv("p_load", bus.p_load)
            .kv("q_load", bus.q_load);
        if bus.dg != 0.0 {
            w.kv("dg", bus.dg);
        }
        match bus.injection_set {
            InjectionSet::Box => {}
            InjectionSet::FixedPowerFactor { rho, lagging } => {
                w.kv("injection", format!("fixed_pf {} {}", rho, if lagging { "lagging" } else { "leading" }));
            }
            InjectionSet::MinPowerFactor { rho } => {
                w.kv("injection", format!("min_pf {rho}"));
            }
        }
    }
    for (i, line) in grid.lines.iter().enumerate() {
        w.section("line", Some(grid.label(i + 1)))
            .kv("up", grid.label(line.up))
            .kv("r", line.r)
            .kv("x", line.x)
            .kv("b", line.b)
            .kv("i_max_sq", line.i_max_sq);
    }
    w.finish()
}
