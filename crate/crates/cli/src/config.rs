//! Flat key = value configuration with sections: diff-able, no schema
//! tooling. Floats render at 17 significant digits so parse(emit(c)) == c.

use chlab_core::grid::format_f64;
use chlab_core::weights::power_critical_indices_closed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Weights,
    AtomMake,
    AtomValidate,
    Potential,
    Solve,
    VerifyPointwise,
    VerifyDecay,
    VerifySphere,
    VerifyDouble,
    Triviality,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Weights => "weights",
            ExperimentKind::AtomMake => "atom-make",
            ExperimentKind::AtomValidate => "atom-validate",
            ExperimentKind::Potential => "potential",
            ExperimentKind::Solve => "solve",
            ExperimentKind::VerifyPointwise => "verify-pointwise",
            ExperimentKind::VerifyDecay => "verify-decay",
            ExperimentKind::VerifySphere => "verify-sphere",
            ExperimentKind::VerifyDouble => "verify-double",
            ExperimentKind::Triviality => "triviality",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "weights" => ExperimentKind::Weights,
            "atom-make" => ExperimentKind::AtomMake,
            "atom-validate" => ExperimentKind::AtomValidate,
            "potential" => ExperimentKind::Potential,
            "solve" => ExperimentKind::Solve,
            "verify-pointwise" => ExperimentKind::VerifyPointwise,
            "verify-decay" => ExperimentKind::VerifyDecay,
            "verify-sphere" => ExperimentKind::VerifySphere,
            "verify-double" => ExperimentKind::VerifyDouble,
            "triviality" => ExperimentKind::Triviality,
            other => return Err(format!("unknown experiment kind '{other}'")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Worker threads (0 = library default); numerics are thread-count free.
    pub threads: usize,

    // grid
    pub dim: usize,
    pub points_per_axis: usize,
    pub side: f64,
    pub center: [f64; 3],

    // exponents and discretization
    pub m: usize,
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub p0: f64,
    pub d: usize,
    pub probe_stride: usize,
    pub ladder_density: usize,

    // weight spec (power weights; tabulated weights enter through atom files)
    pub weight_a: f64,

    // weights experiment
    pub p_list: Vec<f64>,
    pub s_list: Vec<f64>,
    pub family_cap: usize,

    // randomized family size for verify kinds
    pub family: usize,

    // triviality experiment
    pub triviality_p: f64,
    pub r_ladder: Vec<f64>,

    // atom cube for atom-make
    pub atom_center: [f64; 3],
    pub atom_side: f64,

    // file paths
    pub bump_file: String,
    pub atom_file: String,
    pub field_file: String,
    pub atom_files: Vec<String>,
    pub lambdas: Vec<f64>,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            seed: 1,
            threads: 0,
            dim: 1,
            points_per_axis: 2048,
            side: 16.0,
            center: [0.0; 3],
            m: 1,
            p: 1.0,
            q: 2.0,
            mu: 1.0,
            p0: 2.0,
            d: 1,
            probe_stride: 4,
            ladder_density: 1,
            weight_a: 0.0,
            p_list: vec![1.5, 2.0],
            s_list: vec![1.5, 2.0],
            family_cap: 2000,
            family: 10,
            triviality_p: 0.4,
            r_ladder: vec![8.0, 16.0, 32.0, 64.0],
            atom_center: [0.0; 3],
            atom_side: 1.0,
            bump_file: String::new(),
            atom_file: String::new(),
            field_file: String::new(),
            atom_files: Vec::new(),
            lambdas: Vec::new(),
        }
    }

    /// Canonical emission: every field, fixed order, 17-digit floats.
    pub fn emit(&self) -> String {
        let fl = |v: &[f64]| v.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        s.push_str("[experiment]\n");
        s.push_str(&format!("kind = {}\n", self.kind.as_str()));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("threads = {}\n", self.threads));
        s.push_str("\n[grid]\n");
        s.push_str(&format!("n = {}\n", self.dim));
        s.push_str(&format!("points_per_axis = {}\n", self.points_per_axis));
        s.push_str(&format!("side = {}\n", format_f64(self.side)));
        s.push_str(&format!("center = {}\n", fl(&self.center[..self.dim])));
        s.push_str("\n[params]\n");
        s.push_str(&format!("m = {}\n", self.m));
        s.push_str(&format!("p = {}\n", format_f64(self.p)));
        s.push_str(&format!("q = {}\n", format_f64(self.q)));
        s.push_str(&format!("mu = {}\n", format_f64(self.mu)));
        s.push_str(&format!("p0 = {}\n", format_f64(self.p0)));
        s.push_str(&format!("d = {}\n", self.d));
        s.push_str(&format!("probe_stride = {}\n", self.probe_stride));
        s.push_str(&format!("ladder_density = {}\n", self.ladder_density));
        s.push_str("\n[weight]\n");
        s.push_str(&format!("a = {}\n", format_f64(self.weight_a)));
        s.push_str("\n[weights]\n");
        s.push_str(&format!("p_list = {}\n", fl(&self.p_list)));
        s.push_str(&format!("s_list = {}\n", fl(&self.s_list)));
        s.push_str(&format!("family_cap = {}\n", self.family_cap));
        s.push_str("\n[verify]\n");
        s.push_str(&format!("family = {}\n", self.family));
        s.push_str("\n[triviality]\n");
        s.push_str(&format!("p = {}\n", format_f64(self.triviality_p)));
        s.push_str(&format!("r_ladder = {}\n", fl(&self.r_ladder)));
        s.push_str("\n[atom]\n");
        s.push_str(&format!("center = {}\n", fl(&self.atom_center[..self.dim])));
        s.push_str(&format!("side = {}\n", format_f64(self.atom_side)));
        s.push_str("\n[files]\n");
        s.push_str(&format!("bump = {}\n", self.bump_file));
        s.push_str(&format!("atom = {}\n", self.atom_file));
        s.push_str(&format!("field = {}\n", self.field_file));
        s.push_str(&format!("atoms = {}\n", self.atom_files.join(", ")));
        s.push_str(&format!("lambdas = {}\n", fl(&self.lambdas)));
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Solve);
        let mut section = String::new();
        let mut saw_kind = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value', got '{line}'", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let err = |what: &str| format!("line {}: bad {what} '{value}'", lineno + 1);
            match (section.as_str(), key) {
                ("experiment", "kind") => {
                    cfg.kind = ExperimentKind::parse(value)?;
                    saw_kind = true;
                }
                ("experiment", "seed") => cfg.seed = value.parse().map_err(|_| err("seed"))?,
                ("experiment", "threads") => cfg.threads = value.parse().map_err(|_| err("threads"))?,
                ("grid", "n") => cfg.dim = value.parse().map_err(|_| err("dimension"))?,
                ("grid", "points_per_axis") => {
                    cfg.points_per_axis = value.parse().map_err(|_| err("points_per_axis"))?
                }
                ("grid", "side") => cfg.side = value.parse().map_err(|_| err("side"))?,
                ("grid", "center") => {
                    let vals = parse_f64_list(value).map_err(|_| err("center"))?;
                    cfg.center = [0.0; 3];
                    for (k, v) in vals.into_iter().enumerate().take(3) {
                        cfg.center[k] = v;
                    }
                }
                ("params", "m") => cfg.m = value.parse().map_err(|_| err("m"))?,
                ("params", "p") => cfg.p = value.parse().map_err(|_| err("p"))?,
                ("params", "q") => cfg.q = value.parse().map_err(|_| err("q"))?,
                ("params", "mu") => cfg.mu = value.parse().map_err(|_| err("mu"))?,
                ("params", "p0") => cfg.p0 = value.parse().map_err(|_| err("p0"))?,
                ("params", "d") => cfg.d = value.parse().map_err(|_| err("d"))?,
                ("params", "probe_stride") => {
                    cfg.probe_stride = value.parse().map_err(|_| err("probe_stride"))?
                }
                ("params", "ladder_density") => {
                    cfg.ladder_density = value.parse().map_err(|_| err("ladder_density"))?
                }
                ("weight", "a") => cfg.weight_a = value.parse().map_err(|_| err("weight exponent"))?,
                ("weights", "p_list") => cfg.p_list = parse_f64_list(value).map_err(|_| err("p_list"))?,
                ("weights", "s_list") => cfg.s_list = parse_f64_list(value).map_err(|_| err("s_list"))?,
                ("weights", "family_cap") => {
                    cfg.family_cap = value.parse().map_err(|_| err("family_cap"))?
                }
                ("verify", "family") => cfg.family = value.parse().map_err(|_| err("family"))?,
                ("triviality", "p") => cfg.triviality_p = value.parse().map_err(|_| err("p"))?,
                ("triviality", "r_ladder") => {
                    cfg.r_ladder = parse_f64_list(value).map_err(|_| err("r_ladder"))?
                }
                ("atom", "center") => {
                    let vals = parse_f64_list(value).map_err(|_| err("atom center"))?;
                    cfg.atom_center = [0.0; 3];
                    for (k, v) in vals.into_iter().enumerate().take(3) {
                        cfg.atom_center[k] = v;
                    }
                }
                ("atom", "side") => cfg.atom_side = value.parse().map_err(|_| err("atom side"))?,
                ("files", "bump") => cfg.bump_file = value.to_string(),
                ("files", "atom") => cfg.atom_file = value.to_string(),
                ("files", "field") => cfg.field_file = value.to_string(),
                ("files", "atoms") => {
                    cfg.atom_files =
                        value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                ("files", "lambdas") => cfg.lambdas = parse_f64_list(value).map_err(|_| err("lambdas"))?,
                _ => return Err(format!("line {}: unknown key '{section}.{key}'", lineno + 1)),
            }
        }
        if !saw_kind {
            return Err("missing [experiment] kind".into());
        }
        Ok(cfg)
    }

    /// Admissibility windows, checked at load; the message names the
    /// violated inequality. Which windows apply depends on the kind.
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=3).contains(&self.dim) {
            return Err(format!("1 ≤ n ≤ 3 violated: n = {}", self.dim));
        }
        if self.points_per_axis == 0 || !self.points_per_axis.is_multiple_of(2) {
            return Err(format!(
                "points_per_axis must be even and positive: {}",
                self.points_per_axis
            ));
        }
        if !(self.side > 0.0) {
            return Err(format!("side > 0 violated: {}", self.side));
        }
        if !(1..=2).contains(&self.m) {
            return Err(format!("1 ≤ m ≤ 2 violated: m = {}", self.m));
        }
        if self.weight_a <= -(self.dim as f64) {
            return Err(format!(
                "a > -n violated (weight not locally integrable): a = {}",
                self.weight_a
            ));
        }
        let w = chlab_core::Weight::power(self.dim, self.weight_a).map_err(|e| e.to_string())?;
        let needs_solve_window = matches!(
            self.kind,
            ExperimentKind::Solve
                | ExperimentKind::VerifyPointwise
                | ExperimentKind::VerifyDecay
                | ExperimentKind::VerifyDouble
        );
        let needs_atom_window = needs_solve_window
            || matches!(
                self.kind,
                ExperimentKind::AtomMake | ExperimentKind::AtomValidate | ExperimentKind::Potential
            );
        if needs_solve_window {
            chlab_core::solver::validate_window(self.dim, self.m, self.p, self.q, self.mu, &w)
                .map_err(|e| e.to_string())?;
            let (q_w, _) = power_critical_indices_closed(self.weight_a, self.dim);
            let d_min = ((self.dim as f64) * (q_w / self.p - 1.0)).floor().max(0.0) as usize;
            let d_req = d_min.max(2 * self.m - 1);
            if self.d < d_req {
                return Err(format!(
                    "d ≥ max{{⌊n(q_w/p - 1)⌋, 2m-1}} violated: d = {} < {d_req}",
                    self.d
                ));
            }
        }
        if needs_atom_window {
            chlab_core::atoms::check_atom_parameters(&w, self.p, self.p0, self.d)
                .map_err(|e| e.to_string())?;
        }
        if matches!(self.kind, ExperimentKind::Weights) {
            for &p in &self.p_list {
                if !(p > 1.0) {
                    return Err(format!("A_p scan needs p > 1: p = {p}"));
                }
            }
            for &s in &self.s_list {
                if !(s > 1.0) {
                    return Err(format!("RH_s scan needs s > 1: s = {s}"));
                }
            }
        }
        if matches!(self.kind, ExperimentKind::Triviality) {
            if !(self.triviality_p > 0.0 && self.triviality_p <= 1.0) {
                return Err(format!("0 < p ≤ 1 violated: p = {}", self.triviality_p));
            }
            if self.r_ladder.len() < 2 || self.r_ladder.windows(2).any(|w| w[1] <= w[0]) {
                return Err("triviality r_ladder must be increasing with ≥ 2 radii".into());
            }
        }
        Ok(())
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, ()> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| ())).collect()
}
