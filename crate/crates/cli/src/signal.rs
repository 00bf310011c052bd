//! Reference signal specs, shared by problem files and `--signal`.
//!
//! A spec is a kind followed by its numbers:
//!
//! | spec                                  | signal                               |
//! |---------------------------------------|--------------------------------------|
//! | `two-tank`                            | the piecewise ramp of the example    |
//! | `constant v`                          | `r = v`                              |
//! | `ramp slope`                          | `r = slope·t`                        |
//! | `sinusoid a ω [phase]`                | `r = a·sin(ωt + phase)`              |
//! | `square high low period`              | alternating levels, starting high    |
//! | `piecewise t₀ s₀ c₀ [t₁ s₁ c₁ …]`     | `r = s_k·t + c_k` from `t_k` on      |

use rpitrack_core::sim::{ReferenceSignal, Segment};

pub fn parse_signal(spec: &str) -> Result<ReferenceSignal, String> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let Some((kind, rest)) = words.split_first() else {
        return Err("empty signal spec".into());
    };
    let nums = rest
        .iter()
        .map(|w| match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("expected a number in signal spec, found '{w}'")),
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let arity = |want: &[usize]| {
        if want.contains(&nums.len()) {
            Ok(())
        } else {
            Err(format!("'{kind}' takes {want:?} numbers, got {}", nums.len()))
        }
    };
    match *kind {
        "two-tank" => {
            arity(&[0])?;
            Ok(ReferenceSignal::two_tank_profile())
        }
        "constant" => {
            arity(&[1])?;
            Ok(ReferenceSignal::constant(nums[0]))
        }
        "ramp" => {
            arity(&[1])?;
            Ok(ReferenceSignal::Ramp { slope: nums[0] })
        }
        "sinusoid" => {
            arity(&[2, 3])?;
            Ok(ReferenceSignal::Sinusoid { amplitude: nums[0], omega: nums[1], phase: nums.get(2).copied().unwrap_or(0.0) })
        }
        "square" => {
            arity(&[3])?;
            if nums[2] <= 0.0 {
                return Err("square period must be positive".into());
            }
            Ok(ReferenceSignal::Square { high: nums[0], low: nums[1], period: nums[2] })
        }
        "piecewise" => {
            if nums.is_empty() || nums.len() % 3 != 0 {
                return Err(format!("'piecewise' takes triples 't slope intercept', got {} numbers", nums.len()));
            }
            let segs = nums.chunks(3).map(|c| Segment { t_break: c[0], slope: c[1], intercept: c[2] }).collect();
            ReferenceSignal::piecewise(segs).map_err(|e| e.to_string())
        }
        other => Err(format!(
            "unknown signal kind '{other}' (expected two-tank, constant, ramp, sinusoid, square or piecewise)"
        )),
    }
}
