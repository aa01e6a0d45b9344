#pragma once

#include <string>

#include "httplib.h"

namespace anamnesis::detail {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url);

// POSTs a JSON body and returns the response body; any transport failure,
// timeout or non-2xx status becomes ExternalError.
std::string post_json(const std::string& url, const std::string& body, double timeout_seconds);

}  // namespace anamnesis::detail
