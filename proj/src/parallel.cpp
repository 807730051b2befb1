#include "pdmp/parallel.hpp"

#include <cstdlib>
#include <string>

namespace pdmp
{

unsigned default_workers()
{
    if (const char* env = std::getenv("PDMP_ERGO_WORKERS"))
    {
        try
        {
            const long value = std::stol(env);
            if (value > 0)
            {
                return static_cast<unsigned>(value);
            }
        }
        catch (const std::exception&)
        {
            // fall through to the hardware default
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace pdmp
