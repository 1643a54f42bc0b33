use stedit_core::synth::{font::FontRegistry, render_content_image, render_text, sample_style};

fn ascii(img: &stedit_core::image::TextImage) {
    let ramp = [' ', '.', ':', '+', '#', '@'];
    for y in 0..32 {
        let mut line = String::new();
        for x in 0..128 {
            let lum = 0.299 * img.get(0, y, x) + 0.587 * img.get(1, y, x) + 0.114 * img.get(2, y, x);
            // dark ink on light bg -> invert for visibility
            let v = (1.0 - lum).clamp(0.0, 1.0);
            line.push(ramp[(v * 5.0).round() as usize]);
        }
        println!("{line}");
    }
}

fn main() {
    // Quick visual sanity check: renders a few words as ASCII art.
    let reg = FontRegistry::load(std::path::Path::new("assets/fonts/registry.json")).unwrap();
    let img = render_content_image("Quick5", &reg).unwrap();
    println!("== content image 'Quick5' ==");
    ascii(&img);
    let img2 = render_content_image("wxyz09", &reg).unwrap();
    println!("== content image 'wxyz09' ==");
    ascii(&img2);
    let style = sample_style(7, &reg);
    println!("== styled 'Banana' style={:?} ==", style);
    let img3 = render_text("Banana", &style, &reg).unwrap();
    ascii(&img3);
}
