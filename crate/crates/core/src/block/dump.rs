//! Lossless text dump of block operators.
//!
//! Header `d K_max L_max n`, then one record `l_1 .. l_d k k' row col re im` per
//! nonzero entry. Floats use the shortest representation that round-trips.

use super::layout::BlockLayout;
use super::operator::BlockOperator;
use crate::error::{Error, Result};
use crate::linalg::C64;
use std::fmt::Write as _;

pub fn write_dump(a: &BlockOperator) -> String {
    let layout = a.layout();
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {} {}", a.d(), a.k_max(), a.l_max(), layout.n());
    for (l, m) in a.modes() {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if z == C64::new(0.0, 0.0) {
                    continue;
                }
                let (k, kp) = (layout.block_of(i), layout.block_of(j));
                for x in l {
                    let _ = write!(out, "{x} ");
                }
                let _ = writeln!(
                    out,
                    "{k} {kp} {} {} {:?} {:?}",
                    i - layout.offset(k),
                    j - layout.offset(kp),
                    z.re,
                    z.im
                );
            }
        }
    }
    out
}

pub fn read_dump(text: &str) -> Result<BlockOperator> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        reason: "empty dump".into(),
    })?;
    let h: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: hline + 1,
            reason: format!("bad header: {e}"),
        })?;
    if h.len() != 4 {
        return Err(Error::Parse {
            line: hline + 1,
            reason: "header must be `d K_max L_max n`".into(),
        });
    }
    let (d, k_max, l_max, n) = (h[0], h[1], h[2], h[3]);
    let layout = BlockLayout::new(n, k_max)?;
    let mut op = BlockOperator::zeros(layout.clone(), d, l_max);
    for (i, line) in lines {
        let bad = |reason: String| Error::Parse {
            line: i + 1,
            reason,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != d + 6 {
            return Err(bad(format!("expected {} fields, found {}", d + 6, f.len())));
        }
        let l: Vec<i32> = f[..d]
            .iter()
            .map(|t| t.parse::<i32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let ints: Vec<usize> = f[d..d + 4]
            .iter()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let re: f64 = f[d + 4]
            .parse()
            .map_err(|_| bad(format!("bad float `{}`", f[d + 4])))?;
        let im: f64 = f[d + 5]
            .parse()
            .map_err(|_| bad(format!("bad float `{}`", f[d + 5])))?;
        let (k, kp, row, col) = (ints[0], ints[1], ints[2], ints[3]);
        if k > k_max || kp > k_max || row >= layout.dim(k) || col >= layout.dim(kp) {
            return Err(bad(format!(
                "entry ({k},{kp},{row},{col}) outside the layout"
            )));
        }
        let m = op.mode_mut(&l).map_err(|e| bad(e.to_string()))?;
        m[(layout.offset(k) + row, layout.offset(kp) + col)] = C64::new(re, im);
    }
    Ok(op)
}
