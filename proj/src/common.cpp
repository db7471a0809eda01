#include "ecrp/common.hpp"

namespace ecrp {

Gender parse_gender(const std::string& s) {
    if (s == "f" || s == "F") return Gender::female;
    if (s == "m" || s == "M") return Gender::male;
    throw DataError("unknown gender '" + s + "' (expected f or m)");
}

char gender_code(Gender g) { return g == Gender::female ? 'f' : 'm'; }

}  // namespace ecrp
