//! Grid flags: `start:stop:step` (inclusive) or comma-separated lists.

/// Grid values are rounded to this many decimals, so that `0.005:0.03:0.001`
/// yields `0.009` rather than `0.009000000000000001`.
const DECIMALS: i32 = 12;

fn round(v: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    (v * scale).round() / scale
}

fn number(text: &str) -> Result<f64, String> {
    let v: f64 = text.trim().parse().map_err(|_| format!("'{}' is not a number", text.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{}' is not finite", text.trim()))
    }
}

pub fn parse_f64_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if !(step > 0.0) {
                return Err(format!("grid step must be positive, got {step}"));
            }
            if stop < start {
                return Err(format!("grid stop {stop} is below start {start}"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| round(start + i as f64 * step)).collect()
        }
        [list] => list.split(',').map(number).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("'{text}' is neither start:stop:step nor a comma list")),
    };
    if values.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(values)
}

pub fn parse_usize_grid(text: &str) -> Result<Vec<usize>, String> {
    parse_f64_grid(text)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("{v} is not a nonnegative integer"))
            }
        })
        .collect()
}

/// A comma list of numbers (a vector value such as a parameter).
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(number).collect()
}
