use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::debug;

use super::label::PersonalityProfile;
use crate::error::{Error, Result};

/// One 60 Hz eye-tracker record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GazeSample {
    pub t: f64,
    pub gaze_x: f64,
    pub gaze_y: f64,
    pub pupil: f64,
    pub blink: u8,
}

impl GazeSample {
    pub fn row(&self) -> [f64; 4] {
        [self.gaze_x, self.gaze_y, self.pupil, f64::from(self.blink)]
    }
}

#[derive(Clone, Copy, Debug)]
enum PupilColumns {
    Single(usize),
    Pair(usize, usize),
}

struct RecordingColumns {
    t: usize,
    x: usize,
    y: usize,
    pupil: PupilColumns,
    blink: usize,
    width: usize,
}

fn recording_columns(path: &Path, header: &str) -> Result<RecordingColumns> {
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |n: &str| names.iter().position(|c| *c == n);
    let require = |n: &str| {
        find(n).ok_or_else(|| Error::Schema {
            path: path.to_path_buf(),
            msg: format!("missing required column {n:?}"),
        })
    };
    let pupil = match (find("pupil_left"), find("pupil_right"), find("pupil")) {
        (Some(l), Some(r), _) => PupilColumns::Pair(l, r),
        (Some(l), None, _) => PupilColumns::Single(l),
        (None, None, Some(p)) => PupilColumns::Single(p),
        _ => {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                msg: "missing required column \"pupil_left\"".into(),
            })
        }
    };
    Ok(RecordingColumns {
        t: require("t")?,
        x: require("gaze_x")?,
        y: require("gaze_y")?,
        pupil,
        blink: require("blink")?,
        width: names.len(),
    })
}

/// Reads one participant's recording CSV
/// (`t,gaze_x,gaze_y,pupil_left[,pupil_right],blink`). When both pupil
/// columns are present the diameter is their mean.
pub fn parse_recording(path: &Path, participant_id: &str) -> Result<Vec<GazeSample>> {
    let text = fs::read_to_string(path)?;
    parse_recording_str(path, participant_id, &text)
}

pub(crate) fn parse_recording_str(path: &Path, participant_id: &str, text: &str) -> Result<Vec<GazeSample>> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l.trim_start_matches('\u{feff}'),
            None => {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    msg: "missing header".into(),
                })
            }
        }
    };
    let cols = recording_columns(path, header)?;
    match cols.pupil {
        PupilColumns::Pair(..) => debug!("{participant_id}: averaging left and right pupil diameters"),
        PupilColumns::Single(_) => debug!("{participant_id}: using single pupil column"),
    }
    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.width {
            return Err(err(format!("expected {} fields, found {}", cols.width, fields.len())));
        }
        let num = |idx: usize, name: &str| -> Result<f64> {
            let v: f64 = fields[idx]
                .parse()
                .map_err(|_| err(format!("{name}: cannot parse {:?}", fields[idx])))?;
            if !v.is_finite() {
                return Err(err(format!("{name}: non-finite value")));
            }
            Ok(v)
        };
        let t = num(cols.t, "t")?;
        if t < last_t {
            return Err(err(format!("timestamp {t} decreases (previous {last_t})")));
        }
        last_t = t;
        let pupil = match cols.pupil {
            PupilColumns::Single(p) => num(p, "pupil")?,
            PupilColumns::Pair(l, r) => 0.5 * (num(l, "pupil_left")? + num(r, "pupil_right")?),
        };
        let blink = match fields[cols.blink] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("blink must be 0 or 1, got {other:?}"))),
        };
        out.push(GazeSample {
            t,
            gaze_x: num(cols.x, "gaze_x")?,
            gaze_y: num(cols.y, "gaze_y")?,
            pupil,
            blink,
        });
    }
    Ok(out)
}

/// Reads `participant_id,O,C,E,A,N` with integer bins.
pub fn parse_personality(path: &Path) -> Result<BTreeMap<String, PersonalityProfile>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.to_path_buf(),
        msg: "missing header".into(),
    })?;
    let names: Vec<&str> = header.trim_start_matches('\u{feff}').split(',').map(str::trim).collect();
    let mut idx = [0usize; 6];
    for (slot, want) in idx.iter_mut().zip(["participant_id", "O", "C", "E", "A", "N"]) {
        *slot = names.iter().position(|n| *n == want).ok_or_else(|| Error::Schema {
            path: path.to_path_buf(),
            msg: format!("missing required column {want:?}"),
        })?;
    }
    let mut out = BTreeMap::new();
    for (i, line) in lines {
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(err(format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        let mut bins = [0u8; 5];
        for (b, &col) in bins.iter_mut().zip(&idx[1..]) {
            *b = match fields[col] {
                "0" => 0,
                "1" => 1,
                "2" => 2,
                other => return Err(err(format!("bin must be 0, 1 or 2, got {other:?}"))),
            };
        }
        let id = fields[idx[0]].to_string();
        if out.insert(id.clone(), PersonalityProfile::new(bins)?).is_some() {
            return Err(err(format!("duplicate participant {id:?}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<GazeSample>> {
        parse_recording_str(Path::new("p01.csv"), "p01", text)
    }

    #[test]
    fn maps_fields_directly() {
        let s = parse("t,gaze_x,gaze_y,pupil_left,blink\n0.0,0.5,0.5,3.2,0\n").unwrap();
        assert_eq!(
            s,
            vec![GazeSample {
                t: 0.0,
                gaze_x: 0.5,
                gaze_y: 0.5,
                pupil: 3.2,
                blink: 0
            }]
        );
    }

    #[test]
    fn averages_two_pupils() {
        let s = parse("t,gaze_x,gaze_y,pupil_left,pupil_right,blink\n0,0.1,0.2,3.0,4.0,1\n").unwrap();
        assert_eq!(s[0].pupil, 3.5);
        assert_eq!(s[0].blink, 1);
    }

    #[test]
    fn bad_blink_reports_line() {
        let e = parse("t,gaze_x,gaze_y,pupil_left,blink\n0.0,0.5,0.5,3.2,0\n0.1,0.5,0.5,3.2,2\n").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_body_is_empty() {
        assert!(parse("t,gaze_x,gaze_y,pupil_left,blink\n").unwrap().is_empty());
    }

    #[test]
    fn missing_column_is_schema_error() {
        assert!(matches!(
            parse("t,gaze_x,pupil_left,blink\n0,0.5,3.2,0\n"),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn malformed_number_and_width() {
        assert!(matches!(
            parse("t,gaze_x,gaze_y,pupil_left,blink\n0,abc,0.5,3.2,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("t,gaze_x,gaze_y,pupil_left,blink\n0,0.5,0.5,3.2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("t,gaze_x,gaze_y,pupil_left,blink\n1,0.5,0.5,3.2,0\n0.5,0.5,0.5,3.2,0\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn personality_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("personality.csv");
        fs::write(&p, "participant_id,O,C,E,A,N\np01,0,1,2,1,0\np02,2,2,2,2,2\n").unwrap();
        let m = parse_personality(&p).unwrap();
        assert_eq!(m["p01"].bins(), [0, 1, 2, 1, 0]);
        assert_eq!(m.len(), 2);
        fs::write(&p, "participant_id,O,C,E,A,N\np01,0,1,3,1,0\n").unwrap();
        assert!(matches!(parse_personality(&p), Err(Error::Parse { line: 2, .. })));
    }
}
