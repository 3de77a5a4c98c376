//! Motion-vector file format: CSV with header `x,y,u,v,t`.
//!
//! Floats are written with 17 significant digits so a load reproduces the
//! saved values bit-for-bit; theta and l are recomputed on load rather than
//! stored.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::MotionVector;

pub const VECTORS_HEADER: &str = "x,y,u,v,t";

pub fn save_vectors(vectors: &[MotionVector], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{VECTORS_HEADER}")?;
        for v in vectors {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{}", v.x, v.y, v.u, v.v, v.t)?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_vectors(path: &Path) -> Result<Vec<MotionVector>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vectors(&text)
}

pub fn parse_vectors(text: &str) -> Result<Vec<MotionVector>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == VECTORS_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{VECTORS_HEADER}`, found `{header}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }

    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let num = |s: &str, name: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric {name} field `{s}`"),
            })
        };
        let x = num(fields[0], "x")?;
        let y = num(fields[1], "y")?;
        let u = num(fields[2], "u")?;
        let v = num(fields[3], "v")?;
        let t = fields[4].trim().parse::<u32>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("non-integer t field `{}`", fields[4]),
        })?;
        out.push(MotionVector::new(x, y, u, v, t));
    }
    Ok(out)
}
