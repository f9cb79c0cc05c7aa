#include "mlmc/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mlmc {

namespace {

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext;
}

Image from_bytes(const std::vector<unsigned char>& buf, int h, int w, int c) {
  Image img(h, w, c);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(ch, y, x) =
            buf[(static_cast<size_t>(y) * w + x) * c + ch] / 255.0;
  return img;
}

std::vector<unsigned char> to_bytes(const Image& img) {
  std::vector<unsigned char> buf(img.size());
  for (int ch = 0; ch < img.channels; ++ch)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        buf[(static_cast<size_t>(y) * img.width + x) * img.channels + ch] =
            static_cast<unsigned char>(
                std::lround(std::clamp(img.at(ch, y, x), 0.0, 1.0) * 255.0));
  return buf;
}

Image read_png(const std::string& path) {
  png_image im;
  std::memset(&im, 0, sizeof(im));
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str()))
    throw std::runtime_error("cannot read PNG '" + path + "': " + im.message);
  const int c = PNG_IMAGE_SAMPLE_CHANNELS(im.format) >= 3 ? 3 : 1;
  im.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&im);
    throw std::runtime_error("cannot decode PNG '" + path + "': " + im.message);
  }
  return from_bytes(buf, im.height, im.width, c);
}

void write_png(const std::string& path, const Image& img) {
  png_image im;
  std::memset(&im, 0, sizeof(im));
  im.version = PNG_IMAGE_VERSION;
  im.width = img.width;
  im.height = img.height;
  im.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  auto buf = to_bytes(img);
  if (!png_image_write_to_file(&im, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("cannot write PNG '" + path + "': " + im.message);
}

Image read_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::string magic;
  f >> magic;
  if (magic != "P5" && magic != "P6")
    throw std::runtime_error("unsupported PNM magic in '" + path + "'");
  auto next_int = [&]() {
    int v;
    // skip whitespace and '#' comments
    for (;;) {
      int ch = f.peek();
      if (ch == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(ch)) {
        f.get();
      } else {
        break;
      }
    }
    f >> v;
    return v;
  };
  const int w = next_int(), h = next_int(), maxv = next_int();
  if (maxv != 255)
    throw std::runtime_error("only 8-bit PNM supported: '" + path + "'");
  f.get();  // single whitespace before raster
  const int c = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(static_cast<size_t>(w) * h * c);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated PNM '" + path + "'");
  return from_bytes(buf, h, w, c);
}

void write_pnm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  f << (img.channels == 3 ? "P6" : "P5") << "\n"
    << img.width << " " << img.height << "\n255\n";
  auto buf = to_bytes(img);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("cannot write PNM '" + path + "'");
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open image '" + path + "'");
  unsigned char magic[2] = {0, 0};
  f.read(reinterpret_cast<char*>(magic), 2);
  f.close();
  if (magic[0] == 0x89 && magic[1] == 'P') return read_png(path);
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'))
    return read_pnm(path);
  throw std::runtime_error("unsupported image format in '" + path +
                           "' (want 8-bit PNG, PGM, or PPM)");
}

void write_image(const std::string& path, const Image& img) {
  const std::string ext = lower_ext(path);
  if (ext == "png") return write_png(path, img);
  if (ext == "pgm" || ext == "ppm") return write_pnm(path, img);
  throw std::runtime_error("unsupported image extension '" + ext + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_kernel_text(const std::string& path, const Kernel& k) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write kernel text '" + path + "'");
  for (int y = 0; y < k.side; ++y) {
    for (int x = 0; x < k.side; ++x)
      f << (x ? " " : "") << format_double(k.at(y, x));
    f << "\n";
  }
}

Kernel read_kernel_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read kernel text '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    rows.push_back(std::move(row));
  }
  const int side = static_cast<int>(rows.size());
  Kernel k(side);
  for (int y = 0; y < side; ++y) {
    if (static_cast<int>(rows[y].size()) != side)
      throw std::runtime_error("kernel text '" + path + "' is not square");
    for (int x = 0; x < side; ++x) k.at(y, x) = rows[y][x];
  }
  return k;
}

void write_kernel_image(const std::string& path, const Kernel& k) {
  const double mx = *std::max_element(k.grid.begin(), k.grid.end());
  Image img(k.side, k.side, 1);
  if (mx > 0.0)
    for (int y = 0; y < k.side; ++y)
      for (int x = 0; x < k.side; ++x) img.at(0, y, x) = k.at(y, x) / mx;
  write_image(path, img);
}

KvMap read_kv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  KvMap kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_kv(const std::string& path, const KvMap& kv) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& [k, v] : kv) f << k << " = " << v << "\n";
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::runtime_error("bad boolean value '" + v + "'");
}

}  // namespace

void apply_kv(SolverConfig& cfg, const KvMap& kv) {
  for (const auto& [key, val] : kv) {
    if (key == "iters") cfg.outer_iters = std::stoi(val);
    else if (key == "mcka_steps") cfg.mcka_steps = std::stoi(val);
    else if (key == "meta_updates") cfg.meta_updates = std::stoi(val);
    else if (key == "image_steps") cfg.image_steps = std::stoi(val);
    else if (key == "mc_samples") cfg.mc_samples = std::stoi(val);
    else if (key == "lr_kernel_mc") cfg.lr_kernel_mc = std::stod(val);
    else if (key == "lr_kernel_ml") cfg.lr_kernel_ml = std::stod(val);
    else if (key == "lr_image") cfg.lr_image = std::stod(val);
    else if (key == "epsilon") cfg.epsilon = std::stod(val);
    else if (key == "rho_reg") cfg.rho_reg = std::stod(val);
    else if (key == "logit_reg") cfg.logit_reg = std::stod(val);
    else if (key == "meta_kernel_steps") cfg.meta_kernel_steps = std::stoi(val);
    else if (key == "lr_mc_decay") cfg.lr_mc_decay = std::stod(val);
    else if (key == "lr_ml_decay") cfg.lr_ml_decay = std::stod(val);
    else if (key == "lr_ml_warmup") cfg.lr_ml_warmup = std::stoi(val);
    else if (key == "eta") cfg.eta = std::stod(val);
    else if (key == "meta_weights") {
      cfg.meta_weights.clear();
      std::istringstream is(val);
      double w;
      while (is >> w) cfg.meta_weights.push_back(w);
    } else if (key == "scale") cfg.scale = std::stoi(val);
    else if (key == "width_lo_per_s") cfg.ranges.width_lo_per_s = std::stod(val);
    else if (key == "width_hi_per_s") cfg.ranges.width_hi_per_s = std::stod(val);
    else if (key == "angle_lo") cfg.ranges.angle_lo = std::stod(val);
    else if (key == "angle_hi") cfg.ranges.angle_hi = std::stod(val);
    else if (key == "center_jitter") cfg.ranges.center_jitter = std::stod(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "no_mc") cfg.no_mc = parse_bool(val);
    else if (key == "no_meta") cfg.no_meta = parse_bool(val);
    else if (key == "ood_kernels") cfg.ood_kernels = parse_bool(val);
    else if (key == "normalize_weights") cfg.normalize_weights = parse_bool(val);
    else if (key == "bicubic_first_weights")
      cfg.bicubic_first_weights = parse_bool(val);
    else if (key == "unroll_kernel_per_step")
      cfg.unroll_kernel_per_step = parse_bool(val);
    else
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

KvMap config_to_kv(const SolverConfig& cfg) {
  KvMap kv;
  kv["iters"] = std::to_string(cfg.outer_iters);
  kv["mcka_steps"] = std::to_string(cfg.mcka_steps);
  kv["meta_updates"] = std::to_string(cfg.meta_updates);
  kv["image_steps"] = std::to_string(cfg.image_steps);
  kv["mc_samples"] = std::to_string(cfg.mc_samples);
  kv["lr_kernel_mc"] = format_double(cfg.lr_kernel_mc);
  kv["lr_kernel_ml"] = format_double(cfg.lr_kernel_ml);
  kv["lr_image"] = format_double(cfg.lr_image);
  kv["epsilon"] = format_double(cfg.epsilon);
  kv["rho_reg"] = format_double(cfg.rho_reg);
  kv["logit_reg"] = format_double(cfg.logit_reg);
  kv["meta_kernel_steps"] = std::to_string(cfg.meta_kernel_steps);
  kv["lr_mc_decay"] = format_double(cfg.lr_mc_decay);
  kv["lr_ml_decay"] = format_double(cfg.lr_ml_decay);
  kv["lr_ml_warmup"] = std::to_string(cfg.lr_ml_warmup);
  kv["eta"] = format_double(cfg.eta);
  {
    std::string w;
    for (double v : cfg.effective_meta_weights()) {
      if (!w.empty()) w += " ";
      w += format_double(v);
    }
    kv["meta_weights"] = w;
  }
  kv["scale"] = std::to_string(cfg.scale);
  kv["width_lo_per_s"] = format_double(cfg.ranges.width_lo_per_s);
  kv["width_hi_per_s"] = format_double(cfg.ranges.width_hi_per_s);
  kv["angle_lo"] = format_double(cfg.ranges.angle_lo);
  kv["angle_hi"] = format_double(cfg.ranges.angle_hi);
  kv["center_jitter"] = format_double(cfg.ranges.center_jitter);
  kv["seed"] = std::to_string(cfg.seed);
  kv["no_mc"] = cfg.no_mc ? "1" : "0";
  kv["no_meta"] = cfg.no_meta ? "1" : "0";
  kv["ood_kernels"] = cfg.ood_kernels ? "1" : "0";
  kv["normalize_weights"] = cfg.normalize_weights ? "1" : "0";
  kv["bicubic_first_weights"] = cfg.bicubic_first_weights ? "1" : "0";
  kv["unroll_kernel_per_step"] = cfg.unroll_kernel_per_step ? "1" : "0";
  return kv;
}

}  // namespace mlmc
