#include "avoharvest/formats.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace avo {

namespace {

// ---- binary helpers -------------------------------------------------------

void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

class ByteReader {
 public:
  explicit ByteReader(std::istream& is) : is_(is) {}

  std::uint64_t offset() const { return offset_; }

  void read(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw ParseError(fmt::format("truncated input reading {}", what), fmt::format("byte {}", offset_));
    }
    offset_ += n;
  }
  std::uint16_t u16(const char* what) {
    unsigned char b[2];
    read(reinterpret_cast<char*>(b), 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  [[noreturn]] void fail(const std::string& msg, std::uint64_t at) const {
    throw ParseError(msg, fmt::format("byte {}", at));
  }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

// ---- text helpers ---------------------------------------------------------

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  return {std::istream_iterator<std::string>(ss), std::istream_iterator<std::string>()};
}

std::vector<std::string> split_char(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(fmt::format("bad number '{}'", s), where);
  return v;
}

template <typename Int>
Int to_int(const std::string& s, const std::string& where) {
  Int v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(fmt::format("bad integer '{}'", s), where);
  return v;
}

std::string line_ref(int n) { return fmt::format("line {}", n); }

// Reads the next line that is neither blank nor a '#' comment.
bool next_line(std::istream& is, std::string& line, int& number) {
  while (std::getline(is, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

Frame frame_from_string(const std::string& s, const std::string& where) {
  if (s == "camera") return Frame::kCamera;
  if (s == "arm") return Frame::kArm;
  throw ParseError(fmt::format("unknown frame '{}'", s), where);
}

}  // namespace

// ---- masks ----------------------------------------------------------------

void write_masks(std::ostream& os, const DetectionSet& detections) {
  if (detections.width < 0 || detections.height < 0) throw DomainError("negative mask size");
  os.write("AVMK", 4);
  put_u16(os, 1);
  put_u16(os, 0);
  put_u32(os, static_cast<std::uint32_t>(detections.width));
  put_u32(os, static_cast<std::uint32_t>(detections.height));
  put_u32(os, static_cast<std::uint32_t>(detections.masks.size()));
  for (const auto& mask : detections.masks) {
    if (mask.rows() != detections.height || mask.cols() != detections.width) {
      throw DimensionError("mask size differs from the detection set size");
    }
    std::vector<std::uint32_t> runs;
    bool value = false;
    std::uint32_t run = 0;
    const std::uint8_t* px = mask.data();
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      const bool on = px[i] != 0;
      if (on != value) {
        runs.push_back(run);
        run = 0;
        value = on;
      }
      ++run;
    }
    runs.push_back(run);
    put_u32(os, static_cast<std::uint32_t>(runs.size()));
    for (auto r : runs) put_u32(os, r);
  }
}

DetectionSet read_masks(std::istream& is) {
  ByteReader in(is);
  char magic[4];
  in.read(magic, 4, "magic");
  if (std::memcmp(magic, "AVMK", 4) != 0) in.fail("bad magic, expected AVMK", 0);
  const auto version_at = in.offset();
  const auto version = in.u16("version");
  if (version != 1) in.fail(fmt::format("unsupported version {}", version), version_at);
  const auto flags_at = in.offset();
  if (in.u16("flags") != 0) in.fail("non-zero flags", flags_at);
  DetectionSet out;
  const auto w = in.u32("width");
  const auto h = in.u32("height");
  if (w > (1u << 16) || h > (1u << 16)) in.fail("implausible image size", 8);
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  const auto count = in.u32("count");
  const std::uint64_t pixels = static_cast<std::uint64_t>(w) * h;
  for (std::uint32_t m = 0; m < count; ++m) {
    const auto runs_at = in.offset();
    const auto nruns = in.u32("run count");
    if (nruns == 0 || nruns > pixels + 1) in.fail(fmt::format("mask {}: bad run count {}", m, nruns), runs_at);
    MaskImage mask = MaskImage::Zero(out.height, out.width);
    std::uint8_t* px = mask.data();
    std::uint64_t pos = 0;
    for (std::uint32_t r = 0; r < nruns; ++r) {
      const auto at = in.offset();
      const auto len = in.u32("run");
      if (pos + len > pixels) in.fail(fmt::format("mask {}: runs exceed {} pixels", m, pixels), at);
      if (r % 2 == 1) std::fill(px + pos, px + pos + len, std::uint8_t{1});
      pos += len;
    }
    if (pos != pixels) {
      in.fail(fmt::format("mask {}: runs cover {} of {} pixels", m, pos, pixels), in.offset());
    }
    out.masks.push_back(std::move(mask));
  }
  if (is.peek() != std::char_traits<char>::eof()) in.fail("trailing bytes after the last mask", in.offset());
  return out;
}

// ---- depth ----------------------------------------------------------------

void write_depth_pgm(std::ostream& os, const DepthImage& depth_m) {
  fmt::print(os, "P5\n{} {}\n65535\n", depth_m.cols(), depth_m.rows());
  std::string buf(static_cast<std::size_t>(depth_m.size()) * 2, '\0');
  const double* d = depth_m.data();
  for (Eigen::Index i = 0; i < depth_m.size(); ++i) {
    double mm = std::isfinite(d[i]) && d[i] > 0.0 ? std::round(d[i] * 1000.0) : 0.0;
    mm = std::min(mm, 65535.0);
    const auto v = static_cast<std::uint16_t>(mm);
    buf[static_cast<std::size_t>(2 * i)] = static_cast<char>(v >> 8);
    buf[static_cast<std::size_t>(2 * i + 1)] = static_cast<char>(v & 0xFF);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

DepthImage read_depth_pgm(std::istream& is) {
  std::uint64_t offset = 0;
  auto get = [&]() {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw ParseError("truncated PGM header", fmt::format("byte {}", offset));
    ++offset;
    return static_cast<char>(c);
  };
  auto token = [&]() {
    std::string t;
    char c = get();
    for (;;) {
      if (c == '#') {
        while (c != '\n') c = get();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        c = get();
      } else {
        break;
      }
    }
    while (!std::isspace(static_cast<unsigned char>(c))) {
      t.push_back(c);
      c = get();
    }
    return t;  // the single whitespace after the token is consumed
  };
  const auto magic_at = offset;
  if (token() != "P5") throw ParseError("not a binary PGM (P5)", fmt::format("byte {}", magic_at));
  const auto where = [&] { return fmt::format("byte {}", offset); };
  const int w = to_int<int>(token(), where());
  const int h = to_int<int>(token(), where());
  const int maxval = to_int<int>(token(), where());
  if (w <= 0 || h <= 0) throw ParseError("PGM size must be positive", where());
  if (maxval <= 0 || maxval > 65535) throw ParseError("PGM maxval out of range", where());
  const int bpp = maxval > 255 ? 2 : 1;
  std::string buf(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bpp, '\0');
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw ParseError("truncated PGM pixel data", fmt::format("byte {}", offset + static_cast<std::uint64_t>(is.gcount())));
  }
  DepthImage out(h, w);
  double* d = out.data();
  const auto* b = reinterpret_cast<const unsigned char*>(buf.data());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const unsigned v = bpp == 2 ? (b[2 * i] << 8) | b[2 * i + 1] : b[i];
    d[i] = static_cast<double>(v) / 1000.0;
  }
  return out;
}

// ---- estimates ------------------------------------------------------------

void write_estimates(std::ostream& os, const std::vector<AvocadoEstimate>& estimates) {
  // values that round to zero print without a sign
  const auto z = [](double v) { return std::abs(v) < 5e-10 ? 0.0 : v; };
  os << "# frame x y z yaw pitch roll distance\n";
  for (const auto& e : estimates) {
    fmt::print(os, "{} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f}\n", to_string(e.frame), z(e.center.x()),
               z(e.center.y()), z(e.center.z()), z(e.euler[0]), z(e.euler[1]), z(e.euler[2]), z(e.distance));
  }
}

std::vector<AvocadoEstimate> read_estimates(std::istream& is) {
  std::vector<AvocadoEstimate> out;
  std::string line;
  int n = 0;
  while (next_line(is, line, n)) {
    const auto f = split_ws(line);
    if (f.size() != 8) throw ParseError(fmt::format("expected 8 fields, got {}", f.size()), line_ref(n));
    AvocadoEstimate e;
    e.frame = frame_from_string(f[0], line_ref(n));
    e.center = {to_double(f[1], line_ref(n)), to_double(f[2], line_ref(n)), to_double(f[3], line_ref(n))};
    e.euler = {to_double(f[4], line_ref(n)), to_double(f[5], line_ref(n)), to_double(f[6], line_ref(n))};
    e.rotation = from_euler_zyx<double>(e.euler);
    e.distance = to_double(f[7], line_ref(n));
    out.push_back(e);
  }
  return out;
}

// ---- workspace grid -------------------------------------------------------

void write_grid(std::ostream& os, const WorkspaceGrid& grid) {
  const auto& g = grid.geometry();
  fmt::print(os, "format avoharvest-grid 1\n");
  fmt::print(os, "origin {} {} {}\n", g.origin.x(), g.origin.y(), g.origin.z());
  fmt::print(os, "voxel_size {}\n", g.voxel_size);
  fmt::print(os, "dims {} {} {}\n", g.dims[0], g.dims[1], g.dims[2]);
  for (ArmId arm : {ArmId::kGripper, ArmId::kFixer}) {
    const auto& set = grid.reachable(arm);
    if (!set.built) continue;
    fmt::print(os, "arm {} steps {} evaluated {} colliding {} occupied {}\n", to_string(arm),
               set.steps_per_joint, set.evaluated, set.colliding, set.occupied_count());
    static constexpr char kHex[] = "0123456789abcdef";
    std::string bits((set.occupied.size() + 3) / 4, '0');
    for (std::size_t k = 0; k < bits.size(); ++k) {
      unsigned nibble = 0;
      for (std::size_t b = 0; b < 4 && 4 * k + b < set.occupied.size(); ++b) {
        if (set.occupied[4 * k + b]) nibble |= 1u << b;
      }
      bits[k] = kHex[nibble];
    }
    fmt::print(os, "bits {}\n", bits);
    for (std::size_t v = 0; v < set.occupied.size(); ++v) {
      if (!set.occupied[v]) continue;
      fmt::print(os, "witness {}", v);
      for (Eigen::Index j = 0; j < set.witness[v].size(); ++j) fmt::print(os, " {}", set.witness[v][j]);
      os << '\n';
    }
  }
  os << "end\n";
}

WorkspaceGrid read_grid(std::istream& is) {
  std::string line;
  int n = 0;
  auto expect = [&](const std::string& key, std::size_t fields) {
    if (!next_line(is, line, n)) throw ParseError(fmt::format("missing '{}'", key), line_ref(n));
    auto f = split_ws(line);
    if (f.empty() || f[0] != key || f.size() != fields) {
      throw ParseError(fmt::format("expected '{}' with {} fields", key, fields - 1), line_ref(n));
    }
    return f;
  };
  auto f = expect("format", 3);
  if (f[1] != "avoharvest-grid" || f[2] != "1") throw ParseError("unsupported grid format", line_ref(n));
  GridGeometry g;
  f = expect("origin", 4);
  g.origin = {to_double(f[1], line_ref(n)), to_double(f[2], line_ref(n)), to_double(f[3], line_ref(n))};
  f = expect("voxel_size", 2);
  g.voxel_size = to_double(f[1], line_ref(n));
  f = expect("dims", 4);
  for (int a = 0; a < 3; ++a) g.dims[static_cast<std::size_t>(a)] = to_int<int>(f[static_cast<std::size_t>(a) + 1], line_ref(n));
  WorkspaceGrid grid(g);
  const std::size_t nvox = g.voxel_count();

  if (!next_line(is, line, n)) throw ParseError("missing 'end'", line_ref(n));
  for (;;) {
    f = split_ws(line);
    if (f.size() == 1 && f[0] == "end") break;
    if (f.size() != 10 || f[0] != "arm" || f[2] != "steps" || f[4] != "evaluated" || f[6] != "colliding" ||
        f[8] != "occupied") {
      throw ParseError("expected an 'arm' section or 'end'", line_ref(n));
    }
    const ArmId arm = [&] {
      try {
        return arm_from_string(f[1]);
      } catch (const DomainError& e) {
        throw ParseError(e.what(), line_ref(n));
      }
    }();
    if (grid.has_arm(arm)) throw ParseError(fmt::format("duplicate arm '{}'", f[1]), line_ref(n));
    ReachableSet& set = grid.reachable(arm);
    set.built = true;
    set.steps_per_joint = to_int<int>(f[3], line_ref(n));
    set.evaluated = to_int<std::uint64_t>(f[5], line_ref(n));
    set.colliding = to_int<std::uint64_t>(f[7], line_ref(n));
    const auto declared = to_int<std::size_t>(f[9], line_ref(n));
    set.occupied.assign(nvox, 0);
    set.witness.assign(nvox, JointVectord());

    f = expect("bits", 2);
    if (f[1].size() != (nvox + 3) / 4) throw ParseError("bitset length does not match the grid", line_ref(n));
    for (std::size_t k = 0; k < f[1].size(); ++k) {
      const char c = f[1][k];
      unsigned nibble = 0;
      if (c >= '0' && c <= '9') nibble = static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') nibble = static_cast<unsigned>(c - 'a' + 10);
      else throw ParseError(fmt::format("bad hex digit '{}'", c), line_ref(n));
      for (std::size_t b = 0; b < 4; ++b) {
        if (!(nibble & (1u << b))) continue;
        if (4 * k + b >= nvox) throw ParseError("bit set beyond the grid", line_ref(n));
        set.occupied[4 * k + b] = 1;
      }
    }
    if (set.occupied_count() != declared) throw ParseError("occupied count does not match the bitset", line_ref(n));

    std::size_t witnesses = 0;
    for (;;) {
      if (!next_line(is, line, n)) throw ParseError("missing 'end'", line_ref(n));
      f = split_ws(line);
      if (f.empty() || f[0] != "witness") break;
      if (f.size() < 3) throw ParseError("witness needs a voxel and joint values", line_ref(n));
      const auto v = to_int<std::size_t>(f[1], line_ref(n));
      if (v >= nvox || !set.occupied[v]) throw ParseError(fmt::format("witness for unoccupied voxel {}", v), line_ref(n));
      if (set.witness[v].size() != 0) throw ParseError(fmt::format("duplicate witness for voxel {}", v), line_ref(n));
      JointVectord q(static_cast<Eigen::Index>(f.size() - 2));
      for (std::size_t j = 2; j < f.size(); ++j) q[static_cast<Eigen::Index>(j - 2)] = to_double(f[j], line_ref(n));
      set.witness[v] = q;
      ++witnesses;
    }
    if (witnesses != declared) throw ParseError("every occupied voxel needs a witness", line_ref(n));
  }
  return grid;
}

void write_grid_points_csv(std::ostream& os, const WorkspaceGrid& grid) {
  os << "arm,voxel,x,y,z\n";
  for (ArmId arm : {ArmId::kGripper, ArmId::kFixer}) {
    const auto& set = grid.reachable(arm);
    if (!set.built) continue;
    for (std::size_t v = 0; v < set.occupied.size(); ++v) {
      if (!set.occupied[v]) continue;
      const Eigen::Vector3d c = grid.geometry().voxel_center(v);
      fmt::print(os, "{},{},{:.3f},{:.3f},{:.3f}\n", to_string(arm), v, c.x(), c.y(), c.z());
    }
  }
}

// ---- trajectories ---------------------------------------------------------

void write_trajectory_csv(std::ostream& os, const JointTrajectory& trajectory) {
  const Eigen::Index dof = trajectory.waypoints.empty() ? 0 : trajectory.waypoints.front().size();
  os << "time";
  for (Eigen::Index j = 0; j < dof; ++j) fmt::print(os, ",q{}", j + 1);
  os << '\n';
  for (std::size_t i = 0; i < trajectory.waypoints.size(); ++i) {
    const auto& q = trajectory.waypoints[i];
    if (q.size() != dof) throw DimensionError("trajectory waypoints differ in length");
    fmt::print(os, "{}", trajectory.dt * static_cast<double>(i));
    for (Eigen::Index j = 0; j < dof; ++j) fmt::print(os, ",{}", q[j]);
    os << '\n';
  }
}

JointTrajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  int n = 0;
  if (!next_line(is, line, n)) throw ParseError("empty trajectory file", line_ref(1));
  const auto header = split_char(line, ',');
  if (header.empty() || header[0] != "time") throw ParseError("header must start with 'time'", line_ref(n));
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != fmt::format("q{}", j)) throw ParseError(fmt::format("expected column q{}", j), line_ref(n));
  }
  const std::size_t dof = header.size() - 1;
  JointTrajectory traj;
  std::vector<double> times;
  while (next_line(is, line, n)) {
    const auto f = split_char(line, ',');
    if (f.size() != header.size()) throw ParseError(fmt::format("expected {} columns", header.size()), line_ref(n));
    times.push_back(to_double(f[0], line_ref(n)));
    JointVectord q(static_cast<Eigen::Index>(dof));
    for (std::size_t j = 0; j < dof; ++j) q[static_cast<Eigen::Index>(j)] = to_double(f[j + 1], line_ref(n));
    traj.waypoints.push_back(q);
  }
  if (times.size() >= 2) {
    traj.dt = times[1] - times[0];
    if (!(traj.dt > 0.0)) throw ParseError("time must increase", line_ref(n));
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (std::abs(times[i] - traj.dt * static_cast<double>(i)) > 1e-9 * std::max(1.0, times[i])) {
        throw ParseError("waypoints must be evenly spaced in time", fmt::format("row {}", i + 1));
      }
    }
  }
  return traj;
}

// ---- harvest report -------------------------------------------------------

void write_report(std::ostream& os, const HarvestReport& r) {
  fmt::print(os, "outcome: {}\n", to_string(r.outcome));
  fmt::print(os, "detached: {}\n", r.detached ? "true" : "false");
  fmt::print(os, "wrist_rotation_used: {:.6f}\n", r.wrist_rotation_used);
  fmt::print(os, "base_translation: [{:.6f}, {:.6f}, {:.6f}]\n", r.base_translation.x(), r.base_translation.y(),
             r.base_translation.z());
  fmt::print(os, "peduncle_offset: {:.6f}\n", r.peduncle_offset);
  if (r.target_center) {
    fmt::print(os, "target_center: [{:.6f}, {:.6f}, {:.6f}]\n", r.target_center->x(), r.target_center->y(),
               r.target_center->z());
  } else {
    os << "target_center: null\n";
  }
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) fmt::print(os, "{}: {:.6f}\n", key, *v);
    else fmt::print(os, "{}: null\n", key);
  };
  opt("fixer_grasp_error", r.fixer_grasp_error);
  opt("gripper_grasp_error", r.gripper_grasp_error);
  std::string msg = r.message;
  for (auto& c : msg) {
    if (c == '\n' || c == '"') c = '\'';
  }
  fmt::print(os, "message: \"{}\"\n", msg);
  os << "timeline:\n";
  for (const auto& t : r.timeline) fmt::print(os, "  - [{}, {:.6f}]\n", to_string(t.phase), t.enter_time);
}

HarvestReport read_report(std::istream& is) {
  HarvestReport r;
  std::string line;
  int n = 0;
  auto vec3 = [&](std::string v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ParseError("expected [x, y, z]", line_ref(n));
    const auto f = split_char(v.substr(1, v.size() - 2), ',');
    if (f.size() != 3) throw ParseError("expected three components", line_ref(n));
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) {
      auto s = f[static_cast<std::size_t>(i)];
      s.erase(0, s.find_first_not_of(' '));
      out[i] = to_double(s, line_ref(n));
    }
    return out;
  };
  auto opt_double = [&](const std::string& v) -> std::optional<double> {
    if (v == "null") return std::nullopt;
    return to_double(v, line_ref(n));
  };
  bool have_outcome = false;
  bool in_timeline = false;
  while (next_line(is, line, n)) {
    if (in_timeline && line.rfind("  - [", 0) == 0) {
      if (line.back() != ']') throw ParseError("bad timeline entry", line_ref(n));
      const auto f = split_char(line.substr(5, line.size() - 6), ',');
      if (f.size() != 2) throw ParseError("timeline entry needs phase and time", line_ref(n));
      std::string t = f[1];
      t.erase(0, t.find_first_not_of(' '));
      try {
        r.timeline.push_back({phase_from_string(f[0]), to_double(t, line_ref(n))});
      } catch (const ParseError& e) {
        throw ParseError(e.what(), line_ref(n));
      }
      continue;
    }
    in_timeline = false;
    const auto colon = line.find(": ");
    const std::string key = line.substr(0, line.find(':'));
    const std::string value = colon == std::string::npos ? std::string() : line.substr(colon + 2);
    if (key == "outcome") {
      try {
        r.outcome = outcome_from_string(value);
      } catch (const ParseError& e) {
        throw ParseError(e.what(), line_ref(n));
      }
      have_outcome = true;
    } else if (key == "detached") {
      if (value != "true" && value != "false") throw ParseError("detached must be true or false", line_ref(n));
      r.detached = value == "true";
    } else if (key == "wrist_rotation_used") {
      r.wrist_rotation_used = to_double(value, line_ref(n));
    } else if (key == "base_translation") {
      r.base_translation = vec3(value);
    } else if (key == "peduncle_offset") {
      r.peduncle_offset = to_double(value, line_ref(n));
    } else if (key == "target_center") {
      if (value == "null") r.target_center.reset();
      else r.target_center = vec3(value);
    } else if (key == "fixer_grasp_error") {
      r.fixer_grasp_error = opt_double(value);
    } else if (key == "gripper_grasp_error") {
      r.gripper_grasp_error = opt_double(value);
    } else if (key == "message") {
      if (value.size() < 2 || value.front() != '"' || value.back() != '"') {
        throw ParseError("message must be quoted", line_ref(n));
      }
      r.message = value.substr(1, value.size() - 2);
    } else if (key == "timeline" && line == "timeline:") {
      in_timeline = true;
    } else {
      throw ParseError(fmt::format("unknown key '{}'", key), line_ref(n));
    }
  }
  if (!have_outcome) throw ParseError("report has no outcome", line_ref(n));
  return r;
}

void write_timeline_csv(std::ostream& os, const HarvestReport& report) {
  os << "phase,enter_time\n";
  for (const auto& t : report.timeline) fmt::print(os, "{},{:.6f}\n", to_string(t.phase), t.enter_time);
}

}  // namespace avo
