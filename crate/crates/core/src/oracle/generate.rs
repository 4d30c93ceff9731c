//! Seeded generator of programs in the supported fragment.
//!
//! Programs are produced as source text and parsed, so every generated
//! program carries real source locations. The fragment covers constant
//! reads, single-comparison guards over `s`, loops `[lo : s - r]` with
//! offset-access bodies, cell-vs-cell guards, opaque blocks over a frame,
//! and occasionally the sort-until-stable loop of the running example.
//! Constant-index writes and other `while` loops are never generated.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frontend::{parse, ParamBinding, Program};

pub const DEFAULT_SIZE_BUDGET: usize = 4;

const PARAMS: [&str; 5] = ["B", "K", "L", "R", "Y"];
const OPS: [&str; 5] = ["<", "<=", ">", ">=", "=="];

struct Gen {
    rng: ChaCha8Rng,
    /// Chance of picking the in-bounds variant of a construct.
    safe: f64,
    params: BTreeSet<&'static str>,
    frame: bool,
    temps: usize,
    opaques: usize,
}

impl Gen {
    fn param(&mut self) -> &'static str {
        let p = *PARAMS.choose(&mut self.rng).expect("nonempty");
        self.params.insert(p);
        p
    }

    /// A param-closed index: literal, param, or param plus a literal.
    fn constant(&mut self) -> String {
        match self.rng.gen_range(0..3) {
            0 => self.rng.gen_range(0..=6).to_string(),
            1 => self.param().to_string(),
            _ => {
                let p = self.param();
                format!("{p} + {}", self.rng.gen_range(1..=2))
            }
        }
    }

    fn small(&mut self) -> String {
        if self.rng.gen_bool(0.3) {
            self.param().to_string()
        } else {
            self.rng.gen_range(0..=3).to_string()
        }
    }

    fn temp(&mut self) -> String {
        self.temps += 1;
        format!("t{}", self.temps)
    }

    fn offsets(&mut self) -> (i64, i64) {
        (self.rng.gen_range(-1..=2), self.rng.gen_range(-1..=2))
    }

    fn at(i: &str, z: i64) -> String {
        match z {
            0 => i.to_string(),
            z if z < 0 => format!("{i} - {}", -z),
            z => format!("{i} + {z}"),
        }
    }

    fn block(&mut self, depth: usize, n: usize) -> String {
        let stmts: Vec<String> = (0..n).map(|_| self.stmt(depth)).collect();
        format!("{{ {} }}", stmts.join("; "))
    }

    fn stmt(&mut self, depth: usize) -> String {
        let roll = self.rng.gen_range(0..100);
        let nested = depth < 3;
        match roll {
            0..=24 => self.constant_read(),
            25..=44 if nested => self.size_guard(depth),
            45..=69 => self.for_loop(),
            70..=79 if nested => {
                let (x, y) = (self.constant(), self.constant());
                let n = self.rng.gen_range(1..=2);
                format!("if a[{x}] < a[{y}] then {}", self.block(depth + 1, n))
            }
            80..=91 => {
                self.frame = true;
                self.opaques += 1;
                format!("opaque f{} reads(x) writes(x) frames(F)", self.opaques)
            }
            92..=99 if depth == 0 => self.sort_loop(),
            _ => self.constant_read(),
        }
    }

    fn constant_read(&mut self) -> String {
        let e = self.constant();
        let read = if self.rng.gen_bool(0.5) {
            format!("a[{e}]")
        } else {
            let t = self.temp();
            format!("{t} := a[{e}]")
        };
        if self.rng.gen_bool(self.safe) {
            format!("if s > {e} then {{ {read} }}")
        } else {
            read
        }
    }

    fn size_guard(&mut self, depth: usize) -> String {
        let op = *OPS.choose(&mut self.rng).expect("nonempty");
        let e = self.constant();
        let guard = if self.rng.gen_bool(0.7) {
            format!("s {op} {e}")
        } else {
            format!("{e} {op} s")
        };
        let n = self.rng.gen_range(1..=2);
        let then = self.block(depth + 1, n);
        if op != "==" && self.rng.gen_bool(0.4) {
            let m = self.rng.gen_range(1..=2);
            format!("if {guard} then {then} else {}", self.block(depth + 1, m))
        } else {
            format!("if {guard} then {then}")
        }
    }

    /// Loop bounds for offsets `zs`; in-bounds ones when the safe variant is picked.
    fn bounds(&mut self, zs: &[i64]) -> (String, String) {
        let (lo, r) = if self.rng.gen_bool(self.safe) {
            let min = zs.iter().copied().min().unwrap_or(0);
            let max = zs.iter().copied().max().unwrap_or(0);
            let slack = self.rng.gen_range(0..=1);
            (
                ((-min).max(0) + self.rng.gen_range(0..=1)).to_string(),
                (max + 1 + slack).max(0).to_string(),
            )
        } else {
            (self.small(), self.small())
        };
        let hi = if r == "0" { "s".to_string() } else { format!("s - {r}") };
        (lo, hi)
    }

    fn for_loop(&mut self) -> String {
        let (zx, zy) = self.offsets();
        let (x, y) = (Self::at("i", zx), Self::at("i", zy));
        let body = match self.rng.gen_range(0..3) {
            0 => format!("if a[{x}] < a[{y}] then {{ tmp := a[{y}]; a[{y}] := a[{x}]; a[{x}] := tmp }}"),
            1 => {
                let t = self.temp();
                format!("{t} := a[{x}]; a[{y}] := {t}")
            }
            _ => format!("if a[{x}] < a[{y}] then {{ a[{x}] }}"),
        };
        let (lo, hi) = self.bounds(&[zx, zy]);
        format!("for i in [{lo} : {hi}] do {{ {body} }}")
    }

    fn sort_loop(&mut self) -> String {
        let (lo, hi) = self.bounds(&[0, 1]);
        format!(
            "ns := 1; while ns == 1 do {{ ns := 0; for i in [{lo} : {hi}] do {{ \
             if a[i + 1] < a[i] then {{ ns := 1; tmp := a[i]; a[i] := a[i + 1]; a[i + 1] := tmp }} }} }}"
        )
    }
}

/// A deterministic pseudo-random program with at most `size_budget` top-level
/// statements, and a binding of its params to values in `0..=6`.
pub fn generate(seed: u64, size_budget: usize) -> (Program, ParamBinding) {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        safe: 0.0,
        params: BTreeSet::new(),
        frame: false,
        temps: 0,
        opaques: 0,
    };
    g.safe = if g.rng.gen_bool(0.5) { 0.9 } else { 0.3 };
    let n = g.rng.gen_range(1..=size_budget.max(1));
    let body: Vec<String> = (0..n).map(|_| g.stmt(0)).collect();
    let layout = if g.frame { "array(a, s) * F" } else { "array(a, s)" };
    let header = if g.params.is_empty() {
        String::new()
    } else {
        format!("param {};\n", g.params.iter().copied().collect::<Vec<_>>().join(", "))
    };
    let src = format!("{header}requires {layout};\n{}\nensures {layout}\n", body.join(";\n"));
    let program = parse(&src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"));
    let binding = g
        .params
        .iter()
        .fold(ParamBinding::new(), |b, p| b.with(p, g.rng.gen_range(0..=6)));
    (program, binding)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_program() {
        for seed in 0..20 {
            assert_eq!(generate(seed, 4), generate(seed, 4));
        }
    }

    #[test]
    fn binding_covers_declared_params() {
        for seed in 0..50 {
            let (p, b) = generate(seed, 4);
            for q in &p.params {
                assert!(b.get(q).is_some_and(|v| v <= 6));
            }
        }
    }
}
