#include "provgate/source_tag.hpp"

namespace provgate {

Value tag_set_to_json(const TagSet& tags) {
  Value arr = Value::array();
  for (const SourceTag& t : tags) arr.push_back(t.to_json());  // std::set: sorted
  return arr;
}

TagSet tag_set_from_json(const Value& v) {
  TagSet out;
  for (const Value& item : v) out.insert(SourceTag::from_json(item));
  return out;
}

}  // namespace provgate
