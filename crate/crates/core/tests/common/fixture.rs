use std::fmt::Write as _;
use std::path::Path;

/// Writes a recording of `n` samples; `dirty` lists `(index, column,
/// value)` overrides applied after the clean signal is generated.
pub fn write_recording(dir: &Path, pid: &str, n: usize, two_pupils: bool, dirty: &[(usize, &str, f64)]) {
    let mut s = String::from(if two_pupils {
        "t,gaze_x,gaze_y,pupil_left,pupil_right,blink\n"
    } else {
        "t,gaze_x,gaze_y,pupil,blink\n"
    });
    for i in 0..n {
        let mut x = 0.5 + 0.3 * (i as f64 * 0.05).sin();
        let mut y = 0.5 + 0.2 * (i as f64 * 0.03).cos();
        let mut p = 3.0 + 0.4 * (i as f64 * 0.01).sin();
        for &(at, col, v) in dirty {
            if at == i {
                match col {
                    "x" => x = v,
                    "y" => y = v,
                    _ => p = v,
                }
            }
        }
        let blink = u8::from(i % 97 < 4);
        let t = i as f64 / 60.0;
        if two_pupils {
            writeln!(s, "{t},{x},{y},{},{},{blink}", p - 0.1, p + 0.1).unwrap();
        } else {
            writeln!(s, "{t},{x},{y},{p},{blink}").unwrap();
        }
    }
    std::fs::write(dir.join(format!("{pid}.csv")), s).unwrap();
}

/// Writes the contaminated three-participant corpus into `dir`.
pub fn fixture(dir: &Path) {
    std::fs::write(
        dir.join("personality.csv"),
        "participant_id,O,C,E,A,N\nclean,2,1,0,1,2\ndirty,0,0,2,0,0\n",
    )
    .unwrap();
    // 900 clean samples: (900 - 300) / 60 + 1 = 11 windows
    write_recording(dir, "clean", 900, true, &[]);
    // 720 samples: (720 - 300) / 60 + 1 = 8 windows starting at 0, 60, ..., 420.
    // Sample 400 (gaze off screen) lies in the windows starting 120..=360;
    // sample 650 (zero pupil) in those starting 360 and 420. Six rejected.
    write_recording(dir, "dirty", 720, false, &[(400, "x", 1.3), (650, "p", 0.0)]);
    // no personality entry, skipped
    write_recording(dir, "stranger", 600, false, &[]);
}
