use curveflow::driver::{run, Mode};
use curveflow::geometry::{Locator, Segment};
use curveflow::scenarios::{circle_config, CircleRun};
use curveflow::Rect;
use curveflow_cli::output::{frame_svg, frames, read_areas, read_segments, write_areas, write_segments, OutputFrame};
use curveflow_cli::table::{render, sweep};
use proptest::prelude::*;

fn segment(pair: (usize, usize), start: [f64; 2], end: [f64; 2]) -> Segment {
    Segment {
        pair,
        element: 0,
        start,
        end,
        start_loc: Locator::Node(0),
        end_loc: Locator::Node(1),
    }
}

proptest! {
    #[test]
    fn csv_round_trips_exactly(
        raw in prop::collection::vec((0usize..3, prop::collection::vec(-1e3f64..1e3, 4), prop::collection::vec(0.0f64..1.0, 3)), 1..6)
    ) {
        let frames: Vec<OutputFrame> = raw
            .iter()
            .enumerate()
            .map(|(step, (n, c, areas))| OutputFrame {
                step,
                time: step as f64 * 0.1,
                areas: areas.clone(),
                segments: (0..*n).map(|i| segment((i % 2, 2), [c[0], c[1]], [c[2], c[3] / 3.0])).collect(),
                fitted: None,
            })
            .collect();
        let reference = [0.3, 0.1 / 3.0, 0.5];
        let mut buf = Vec::new();
        write_segments(&mut buf, &frames).unwrap();
        let rows = read_segments(&buf[..]).unwrap();
        prop_assert_eq!(rows.len(), frames.iter().map(|f| f.segments.len()).sum::<usize>());
        let mut it = rows.iter();
        for f in &frames {
            for s in &f.segments {
                let r = it.next().unwrap();
                prop_assert_eq!((r.step, r.pair, r.start, r.end), (f.step, s.pair, s.start, s.end));
            }
        }
        let mut buf = Vec::new();
        write_areas(&mut buf, &frames, &reference).unwrap();
        let rows = read_areas(&buf[..]).unwrap();
        prop_assert_eq!(rows.len(), frames.len() * 3);
        for (r, (f, p)) in rows.iter().zip(frames.iter().flat_map(|f| (0..3).map(move |p| (f, p)))) {
            prop_assert_eq!((r.step, r.phase, r.area), (f.step, p, f.areas[p]));
            prop_assert_eq!(r.drift, f.areas[p] - reference[p]);
        }
    }
}

#[test]
fn csv_uses_header_and_lf() {
    let f = OutputFrame {
        step: 3,
        time: 0.0,
        areas: vec![0.25, 0.75],
        segments: vec![segment((0, 1), [0.0, 0.5], [1.0, 0.5])],
        fitted: None,
    };
    let mut buf = Vec::new();
    write_segments(&mut buf, std::slice::from_ref(&f)).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "step,i,j,x1,y1,x2,y2\n3,0,1,0,0.5,1,0.5\n");
    let mut buf = Vec::new();
    write_areas(&mut buf, &[f], &[0.25, 0.5]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "step,phase,area,drift\n3,0,0.25,0\n3,1,0.75,0.25\n");
    assert!(read_areas(&b"step,area\n"[..]).is_err());
    assert!(read_segments(&b"step,i,j,x1,y1,x2,y2\n1,2\n"[..]).is_err());
}

#[test]
fn frames_follow_the_output_cadence() {
    let mut c = circle_config(10, 2, Mode::Bmo);
    c.steps = 7;
    c.output_every = 3;
    let t = run(&c).unwrap();
    let steps: Vec<usize> = frames(&t).iter().map(|f| f.step).collect();
    assert_eq!(steps, [0, 3, 6, 7]);
    let svg = frame_svg(&frames(&t)[0], Rect::unit());
    assert!(svg.starts_with("<svg") && svg.contains("<line"));
}

#[test]
fn table_marks_stalled_runs() {
    let t = sweep(Mode::Bmo, &[20], &[2, 64], 1).unwrap();
    assert!(t[0][0].error.is_some());
    assert!(t[0][1].stalled);
    let text = render(Mode::Bmo, &t);
    assert!(text.contains("20 x 20") && text.contains('–'));
    let rows = vec![vec![CircleRun {
        cells: 40,
        subdivision: 8,
        mode: Mode::BmoStar,
        error: Some(0.0024),
        stalled: false,
    }]];
    let text = render(Mode::BmoStar, &rows);
    assert!(text.contains("BMO*") && text.contains("0.0024"));
}
