//! Gnuplot scripts for the CSV outputs. Each script reads its CSV by relative path and
//! writes a PNG next to it.

fn preamble(png: &str, title: &str) -> String {
    format!(
        "set terminal pngcairo size 900,600\n\
         set output '{png}'\n\
         set datafile separator ','\n\
         set key left top\n\
         set grid\n\
         set title '{title}'\n"
    )
}

/// Percentile curves, one line per `(label, csv)` pair.
pub fn percentile_plot_script(curves: &[(&str, &str)], png: &str) -> String {
    let mut s = preamble(png, "final reward by percentile");
    s.push_str("set xlabel 'percentile'\nset ylabel 'reward'\n");
    let plots: Vec<String> = curves
        .iter()
        .map(|(label, csv)| format!("'{csv}' every ::1 using 1:2 with lines lw 2 title '{label}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// Mean with a one-std band against `axis` (`mass` is column 1, `friction` column 2).
pub fn sweep_plot_script(curves: &[(&str, &str)], axis: &str, png: &str) -> String {
    let col = if axis == "friction" { 2 } else { 1 };
    let mut s = preamble(png, &format!("return vs {axis}"));
    s.push_str(&format!("set xlabel '{axis}'\nset ylabel 'return'\n"));
    let plots: Vec<String> = curves
        .iter()
        .map(|(label, csv)| {
            format!(
                "'{csv}' every ::1 using {col}:3:4 with yerrorlines title '{label}'"
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// Heatmap of column `value_col` over the mass x friction grid.
pub fn heatmap_plot_script(csv: &str, value_col: usize, png: &str) -> String {
    let mut s = preamble(png, "mass x friction");
    s.push_str(
        "set xlabel 'mass'\nset ylabel 'friction'\nset view map\nset palette rgbformulae 33,13,10\n",
    );
    s.push_str(&format!(
        "plot '{csv}' every ::1 using 1:2:{value_col} with points pt 5 ps 4 palette notitle\n"
    ));
    s
}

/// Arrows from the probe state to the adversary force. `x_col` and `y_col` pick the
/// state coordinates used as the plot position (1-based CSV columns); `fx_col` and
/// `fy_col` pick the force components (use `0` for a zero component).
pub fn force_plot_script(csv: &str, x_col: usize, y_col: usize, fx_col: usize, fy_col: usize, png: &str) -> String {
    let comp = |c: usize| if c == 0 { "(0)".to_string() } else { format!("(${c}*0.05)") };
    let mut s = preamble(png, "adversary force");
    s.push_str(&format!(
        "plot '{csv}' every ::1 using {x_col}:{y_col}:{}:{} with vectors head filled notitle\n",
        comp(fx_col),
        comp(fy_col)
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripts_reference_their_csvs() {
        let s = percentile_plot_script(&[("rarl", "a.csv"), ("baseline", "b.csv")], "p.png");
        assert!(s.contains("'a.csv'") && s.contains("'b.csv'") && s.contains("set output 'p.png'"));
        assert!(sweep_plot_script(&[("x", "s.csv")], "friction", "o.png").contains("using 2:3:4"));
        assert!(heatmap_plot_script("h.csv", 3, "h.png").contains("using 1:2:3"));
        assert!(force_plot_script("f.csv", 3, 2, 5, 6, "f.png").contains("($5*0.05)"));
    }
}
