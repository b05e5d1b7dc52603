package lib;

import org.junit.Test;
import static org.junit.Assert.*;
import java.util.ArrayList;

public class CalcTest {
    @Test
    public void squares() {
        Calc calc = new Calc();
        List<Long> results = new ArrayList<Long>();
        results.add(calc.square(3L));
        assertEquals(1, results.size());
    }
}
